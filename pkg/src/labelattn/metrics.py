"""Ranking and classification metrics for multi-label prediction batches.

AUC follows the Mann-Whitney pairwise convention with half credit for
ties; macro averages skip labels whose evaluation column contains a
single class. F1 uses a fixed decision threshold and the 0/0 -> 0
convention. Precision@n breaks score ties toward the lower label index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

REPORT_SCHEMA_VERSION = 1


class UndefinedAUCError(ValueError):
    """AUC needs at least one positive and one negative example."""


@dataclass
class PredictionBatch:
    """Scores and binary truths for n documents over m labels."""

    scores: np.ndarray  # [n x m], entries strictly inside (0, 1)
    truths: np.ndarray  # [n x m], entries in {0, 1}

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.truths = np.asarray(self.truths)
        if self.scores.ndim != 2 or self.scores.shape != self.truths.shape:
            raise ValueError(f"scores {self.scores.shape} and truths {self.truths.shape} "
                             "must be equal 2-D shapes")
        if self.scores.size == 0:
            raise ValueError("batch is empty")
        if not ((self.scores > 0.0) & (self.scores < 1.0)).all():
            raise ValueError("scores must lie strictly inside (0, 1)")
        if not np.isin(self.truths, (0, 1)).all():
            raise ValueError("truths must be binary")
        self.truths = self.truths.astype(np.uint8)

    @property
    def n_docs(self) -> int:
        return self.scores.shape[0]

    @property
    def m(self) -> int:
        return self.scores.shape[1]


def auc_binary(scores, truths) -> float:
    """Probability a random positive outscores a random negative, ties half."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(truths).ravel()
    if s.shape != y.shape:
        raise ValueError(f"scores {s.shape} and truths {y.shape} differ")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("need at least one positive and one negative")
    ranks = rankdata(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def per_label_auc(batch: PredictionBatch) -> list:
    """AUC per label; None where the label's truth column has one class."""
    values = []
    for j in range(batch.m):
        try:
            values.append(auc_binary(batch.scores[:, j], batch.truths[:, j]))
        except UndefinedAUCError:
            values.append(None)
    return values


def auc_macro(batch: PredictionBatch) -> float:
    defined = [v for v in per_label_auc(batch) if v is not None]
    if not defined:
        raise UndefinedAUCError("no label has both classes present")
    return float(np.mean(defined))


def auc_micro(batch: PredictionBatch) -> float:
    return auc_binary(batch.scores.ravel(), batch.truths.ravel())


def _f1(tp: float, fp: float, fn: float) -> float:
    denom = 2.0 * tp + fp + fn
    return 2.0 * tp / denom if denom > 0 else 0.0


def per_label_f1(batch: PredictionBatch, threshold: float = 0.5) -> list:
    preds = batch.scores >= threshold
    truths = batch.truths.astype(bool)
    values = []
    for j in range(batch.m):
        tp = float(np.sum(preds[:, j] & truths[:, j]))
        fp = float(np.sum(preds[:, j] & ~truths[:, j]))
        fn = float(np.sum(~preds[:, j] & truths[:, j]))
        values.append(_f1(tp, fp, fn))
    return values


def f1_scores(batch: PredictionBatch, threshold: float = 0.5) -> tuple:
    """(macro, micro) F1 at the given threshold."""
    preds = batch.scores >= threshold
    truths = batch.truths.astype(bool)
    macro = float(np.mean(per_label_f1(batch, threshold)))
    tp = float(np.sum(preds & truths))
    fp = float(np.sum(preds & ~truths))
    fn = float(np.sum(~preds & truths))
    return macro, _f1(tp, fp, fn)


def precision_at_n(batch: PredictionBatch, n: int = 5) -> float:
    """Mean fraction of true labels among each document's top-n scores."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if batch.m < n:
        raise ValueError(f"precision_at_n needs at least n={n} labels, batch has {batch.m}")
    indices = np.arange(batch.m)
    total = 0.0
    for i in range(batch.n_docs):
        # primary key: score descending; tie-break: lower label index
        order = np.lexsort((indices, -batch.scores[i]))
        total += batch.truths[i, order[:n]].sum() / n
    return float(total / batch.n_docs)


@dataclass
class MetricsReport:
    """Aggregate evaluation result, serializable as one JSON document."""

    auc_macro: Optional[float]
    auc_micro: float
    f1_macro: float
    f1_micro: float
    precision_at_n: float
    n: int
    threshold: float
    labels: list = field(default_factory=list)  # [{code, auc | None, f1}]
    undefined_auc_labels: int = 0
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "auc_macro": self.auc_macro,
            "auc_micro": self.auc_micro,
            "f1_macro": self.f1_macro,
            "f1_micro": self.f1_micro,
            "precision_at_n": {"n": self.n, "value": self.precision_at_n},
            "threshold": self.threshold,
            "undefined_auc_labels": self.undefined_auc_labels,
            "labels": self.labels,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, payload: dict) -> "MetricsReport":
        return cls(
            auc_macro=payload["auc_macro"],
            auc_micro=payload["auc_micro"],
            f1_macro=payload["f1_macro"],
            f1_micro=payload["f1_micro"],
            precision_at_n=payload["precision_at_n"]["value"],
            n=payload["precision_at_n"]["n"],
            threshold=payload["threshold"],
            labels=payload["labels"],
            undefined_auc_labels=payload["undefined_auc_labels"],
            schema_version=payload["schema_version"],
        )


def compute_report(batch: PredictionBatch, n: int = 5, threshold: float = 0.5,
                   codes: Optional[Sequence[str]] = None) -> MetricsReport:
    """Evaluate every metric on one batch and bundle the result."""
    if codes is not None and len(codes) != batch.m:
        raise ValueError(f"got {len(codes)} codes for {batch.m} labels")
    label_auc = per_label_auc(batch)
    label_f1 = per_label_f1(batch, threshold)
    defined = [v for v in label_auc if v is not None]
    macro_f1, micro_f1 = f1_scores(batch, threshold)
    rows = []
    for j in range(batch.m):
        code = codes[j] if codes is not None else str(j)
        rows.append({"code": code, "auc": label_auc[j], "f1": label_f1[j]})
    return MetricsReport(
        auc_macro=float(np.mean(defined)) if defined else None,
        auc_micro=auc_micro(batch),
        f1_macro=macro_f1,
        f1_micro=micro_f1,
        precision_at_n=precision_at_n(batch, n),
        n=n,
        threshold=threshold,
        labels=rows,
        undefined_auc_labels=len(label_auc) - len(defined),
    )

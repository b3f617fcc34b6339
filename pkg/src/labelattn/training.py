"""Loss, optimization loop, cross-validation, early stopping and checkpoints."""

from __future__ import annotations

import base64
import json
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import metrics as mt
from . import tensor as tc
from .encoders import EncoderConfig
from .model import (DlacModel, DlacParams, LrcModel, LrcParams,
                    build_dlac_model, build_lrc_model)
from .tensor import Tensor
from .text import Document, LabelSet, Vocabulary

CHECKPOINT_FORMAT_VERSION = 1
PROB_CLAMP = 1e-7
GRAD_CLIP_NORM = 1.0
HEAD_KINDS = ("dlac", "lrc")


class TrainConfigError(ValueError):
    """Training configuration violates a structural constraint."""


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; the message names the offending batch."""


class CheckpointError(ValueError):
    """Checkpoint file is unreadable, incomplete or from another format version."""


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 25
    folds: int = 5
    dropout: float = 0.1
    early_stop_patience: int = 5
    seed: int = 0
    head: str = "dlac"
    d_a: int = 48
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self):
        # lr 0 is allowed: a zero-step run must leave parameters untouched
        if self.lr < 0:
            raise TrainConfigError(f"lr must be non-negative, got {self.lr}")
        if self.batch_size < 1:
            raise TrainConfigError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.epochs < 1:
            raise TrainConfigError(f"epochs must be at least 1, got {self.epochs}")
        if self.folds < 2:
            raise TrainConfigError(f"folds must be at least 2, got {self.folds}")
        if not 0.0 <= self.dropout < 1.0:
            raise TrainConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.early_stop_patience < 1:
            raise TrainConfigError("early_stop_patience must be at least 1")
        if self.head not in HEAD_KINDS:
            raise TrainConfigError(f"unknown head kind {self.head!r}")
        if self.d_a < 1:
            raise TrainConfigError(f"d_a must be at least 1, got {self.d_a}")
        if isinstance(self.encoder, dict):
            self.encoder = EncoderConfig.from_dict(self.encoder)

    def to_dict(self) -> dict:
        payload = {k: getattr(self, k) for k in
                   ("lr", "batch_size", "epochs", "folds", "dropout",
                    "early_stop_patience", "seed", "head", "d_a")}
        payload["encoder"] = self.encoder.to_dict()
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        return cls(**payload)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_micro_f1: float
    wall_time: float = 0.0  # informational only; never serialized


class TrainHistory:
    """Per-epoch records, contiguous from epoch 1."""

    def __init__(self, records: Optional[Sequence[EpochRecord]] = None):
        self.records: list = []
        for rec in records or []:
            self.append(rec)

    def append(self, record: EpochRecord) -> None:
        expected = len(self.records) + 1
        if record.epoch != expected:
            raise ValueError(f"epoch {record.epoch} recorded out of order, expected {expected}")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def val_micro_f1s(self) -> list:
        return [r.val_micro_f1 for r in self.records]

    def best_epoch(self) -> int:
        if not self.records:
            raise ValueError("history is empty")
        return int(np.argmax(self.val_micro_f1s())) + 1

    def to_records(self) -> list:
        # wall time is machine-dependent, so it stays out of serialized form
        return [{"epoch": r.epoch, "train_loss": r.train_loss,
                 "val_loss": r.val_loss, "val_micro_f1": r.val_micro_f1}
                for r in self.records]

    @classmethod
    def from_records(cls, rows: Sequence[dict]) -> "TrainHistory":
        return cls([EpochRecord(epoch=row["epoch"], train_loss=row["train_loss"],
                                val_loss=row["val_loss"], val_micro_f1=row["val_micro_f1"])
                    for row in rows])


@dataclass
class TrainExample:
    id: str
    token_ids: np.ndarray
    labels: np.ndarray


def examples_from_documents(documents: Sequence[Document]) -> list:
    # Document.tokens already hold vocabulary ids, not strings.
    return [TrainExample(id=doc.id,
                         token_ids=np.asarray(doc.tokens, dtype=np.int64),
                         labels=np.asarray(doc.labels, dtype=np.uint8))
            for doc in documents]


def bce_loss(probs: Tensor, y) -> Tensor:
    """Mean binary cross-entropy over labels, with probabilities clamped."""
    target = np.asarray(y, dtype=np.float64)
    if probs.data.shape != target.shape:
        raise tc.ShapeError(f"probs {probs.shape} and targets {target.shape} differ")
    m = target.size
    p = tc.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    pos = tc.scale(tc.log(p), target)
    neg = tc.scale(tc.log(tc.rsub_const(1.0, p)), 1.0 - target)
    return tc.scale(tc.sum_all(tc.add(pos, neg)), -1.0 / m)


def train_epoch(model, examples: Sequence[TrainExample], optimizer: tc.Adam,
                batch_size: int, rng: np.random.Generator,
                clip_norm: float = GRAD_CLIP_NORM) -> float:
    """One shuffled pass; returns the mean per-batch loss."""
    order = rng.permutation(len(examples))
    params = list(optimizer.params.values())
    batch_losses = []
    for batch_index, start in enumerate(range(0, len(order), batch_size)):
        chosen = order[start:start + batch_size]
        losses = []
        for i in chosen:
            ex = examples[i]
            out = model.forward(ex.token_ids, training=True, rng=rng)
            losses.append(bce_loss(out.probs, ex.labels))
        total = losses[0]
        for extra in losses[1:]:
            total = tc.add(total, extra)
        batch_loss = tc.scale(total, 1.0 / len(losses))
        value = batch_loss.item()
        if not np.isfinite(value):
            raise TrainingDivergedError(f"non-finite loss in batch {batch_index}")
        optimizer.zero_grad()
        batch_loss.backward()
        tc.clip_gradient_norm(params, clip_norm)
        optimizer.step()
        batch_losses.append(value)
    return float(np.mean(batch_losses))


def evaluate(model, examples: Sequence[TrainExample]) -> tuple:
    """(mean loss, clamped score matrix) over examples, in eval mode."""
    losses = []
    scores = np.empty((len(examples), examples[0].labels.size))
    for i, ex in enumerate(examples):
        out = model.forward(ex.token_ids)
        losses.append(bce_loss(out.probs, ex.labels).item())
        scores[i] = out.probs.data
    scores = np.clip(scores, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(np.mean(losses)), scores


def prediction_batch(examples: Sequence[TrainExample], scores: np.ndarray) -> mt.PredictionBatch:
    truths = np.stack([ex.labels for ex in examples])
    return mt.PredictionBatch(scores, truths)


def early_stop(val_micro_f1s: Sequence[float], patience: int) -> tuple:
    """(stop now?, best epoch). Best is the earliest maximum."""
    if not len(val_micro_f1s):
        raise ValueError("early_stop needs at least one recorded epoch")
    if patience < 1:
        raise ValueError(f"patience must be at least 1, got {patience}")
    best_value = -np.inf
    best_epoch = 0
    streak = 0
    for epoch, value in enumerate(val_micro_f1s, start=1):
        if value > best_value:
            best_value = value
            best_epoch = epoch
            streak = 0
        else:
            streak += 1
    return streak >= patience, best_epoch


def kfold_split(n_docs: int, k: int = 5, seed: int = 0) -> list:
    """Disjoint (train_indices, validation_indices) pairs covering range(n_docs)."""
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if n_docs < k:
        raise ValueError(f"cannot split {n_docs} documents into {k} folds")
    perm = np.random.default_rng(seed).permutation(n_docs)
    folds = np.array_split(perm, k)
    pairs = []
    for i in range(k):
        val = folds[i]
        train = np.concatenate([folds[j] for j in range(k) if j != i])
        pairs.append((train, val))
    return pairs


def build_model(config: TrainConfig, label_set: LabelSet, vocab: Vocabulary,
                rng: np.random.Generator) -> Union[DlacModel, LrcModel]:
    if config.encoder.vocab_size != vocab.size:
        raise TrainConfigError(f"encoder vocab_size {config.encoder.vocab_size} "
                               f"does not match vocabulary of {vocab.size}")
    if config.head == "dlac":
        return build_dlac_model(config.encoder, label_set, vocab, config.d_a,
                                rng, config.dropout)
    return build_lrc_model(config.encoder, label_set.m, rng, config.dropout)


def train_model(model, train_examples: Sequence[TrainExample],
                val_examples: Sequence[TrainExample], config: TrainConfig,
                rng: np.random.Generator) -> TrainHistory:
    """Train with early stopping; parameters end at the best-epoch snapshot."""
    optimizer = tc.Adam(model.parameters(), lr=config.lr)
    history = TrainHistory()
    best_f1 = -np.inf
    best_params = None
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        train_loss = train_epoch(model, train_examples, optimizer,
                                 config.batch_size, rng)
        val_loss, scores = evaluate(model, val_examples)
        _, val_f1 = mt.f1_scores(prediction_batch(val_examples, scores))
        history.append(EpochRecord(epoch=epoch, train_loss=train_loss,
                                   val_loss=val_loss, val_micro_f1=val_f1,
                                   wall_time=time.perf_counter() - started))
        if val_f1 > best_f1:
            best_f1 = val_f1
            best_params = {name: p.data.copy() for name, p in model.parameters().items()}
        stop, _ = early_stop(history.val_micro_f1s(), config.early_stop_patience)
        if stop:
            break
    if best_params is not None:
        for name, p in model.parameters().items():
            p.data = best_params[name]
    return history


@dataclass
class FoldResult:
    fold: int
    history: TrainHistory
    report: mt.MetricsReport


@dataclass
class CrossValidationResult:
    folds: list
    summary: dict  # metric -> {"mean", "std"} over folds

    def to_dict(self) -> dict:
        return {
            "summary": self.summary,
            "folds": [{"fold": fr.fold,
                       "history": fr.history.to_records(),
                       "report": fr.report.to_dict()} for fr in self.folds],
        }


_SUMMARY_METRICS = ("auc_macro", "auc_micro", "f1_macro", "f1_micro", "precision_at_n")


def cross_validate(examples: Sequence[TrainExample], label_set: LabelSet,
                   vocab: Vocabulary, config: TrainConfig,
                   precision_n: Optional[int] = None) -> CrossValidationResult:
    """Train one model per fold; summarize metrics as mean +- sample std."""
    n = precision_n if precision_n is not None else min(5, label_set.m)
    fold_results = []
    for fold, (train_idx, val_idx) in enumerate(
            kfold_split(len(examples), config.folds, config.seed)):
        rng = np.random.default_rng([config.seed, fold])
        model = build_model(config, label_set, vocab, rng)
        train_part = [examples[i] for i in train_idx]
        val_part = [examples[i] for i in val_idx]
        history = train_model(model, train_part, val_part, config, rng)
        _, scores = evaluate(model, val_part)
        report = mt.compute_report(prediction_batch(val_part, scores),
                                   n=n, codes=label_set.codes)
        fold_results.append(FoldResult(fold=fold, history=history, report=report))
    summary = {}
    for name in _SUMMARY_METRICS:
        values = [getattr(fr.report, name) for fr in fold_results]
        if any(v is None for v in values):
            summary[name] = {"mean": None, "std": None}
        else:
            summary[name] = {"mean": float(np.mean(values)),
                             "std": float(np.std(values, ddof=1))}
    return CrossValidationResult(folds=fold_results, summary=summary)


def _encode_array(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(data.shape),
            "data": base64.b64encode(data.tobytes()).decode("ascii")}


def _decode_array(payload: dict) -> np.ndarray:
    raw = base64.b64decode(payload["data"])
    arr = np.frombuffer(raw, dtype="<f8").reshape(payload["shape"])
    return arr.astype(np.float64)  # writable copy in native order


def save_checkpoint(model, config: TrainConfig, vocab: Vocabulary,
                    label_set: LabelSet, history: TrainHistory, path) -> None:
    """Write the complete model as a single versioned JSON file."""
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": config.to_dict(),
        "params": {name: _encode_array(p.data) for name, p in model.parameters().items()},
        "vocab": vocab.to_dict(),
        "labels": label_set.to_records(),
        "history": history.to_records(),
        "seed": config.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


@dataclass
class LoadedCheckpoint:
    model: Union[DlacModel, LrcModel]
    config: TrainConfig
    vocab: Vocabulary
    label_set: LabelSet
    history: TrainHistory
    seed: int


def load_checkpoint(path) -> LoadedCheckpoint:
    """Rebuild a model whose forward pass is bit-identical to the saved one."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as err:
        raise CheckpointError(f"checkpoint is not valid JSON: {err}") from err
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CheckpointError("checkpoint is missing its format_version field")
    version = payload["format_version"]
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"checkpoint format version {version} is not supported "
                              f"(expected {CHECKPOINT_FORMAT_VERSION})")
    try:
        config = TrainConfig.from_dict(payload["config"])
        vocab = Vocabulary.from_dict(payload["vocab"])
        label_set = LabelSet.from_records(payload["labels"])
        history = TrainHistory.from_records(payload["history"])
        arrays = {name: _decode_array(spec) for name, spec in payload["params"].items()}
        seed = payload["seed"]
    except (KeyError, ValueError, TypeError) as err:
        raise CheckpointError(f"checkpoint is incomplete or malformed: {err}") from err
    model = _model_from_arrays(config, label_set, arrays)
    return LoadedCheckpoint(model=model, config=config, vocab=vocab,
                            label_set=label_set, history=history, seed=seed)


def _model_from_arrays(config: TrainConfig, label_set: LabelSet, arrays: dict):
    from .encoders import build_encoder

    encoder = build_encoder(config.encoder, np.random.default_rng(0))
    for name, tensor in encoder.parameters().items():
        key = f"encoder.{name}"
        if key not in arrays:
            raise CheckpointError(f"checkpoint is missing parameter {key!r}")
        if arrays[key].shape != tensor.data.shape:
            raise CheckpointError(f"parameter {key!r} has shape {arrays[key].shape}, "
                                  f"expected {tensor.data.shape}")
        tensor.data = arrays[key]

    def head_array(name: str) -> Tensor:
        key = f"head.{name}"
        if key not in arrays:
            raise CheckpointError(f"checkpoint is missing parameter {key!r}")
        return Tensor(arrays[key], requires_grad=True)

    if config.head == "dlac":
        params = DlacParams(U=head_array("U"), D=head_array("D"),
                            W=head_array("W"), b=head_array("b"))
        return DlacModel(encoder, params, config.dropout)
    params = LrcParams(W=head_array("W"), b=head_array("b"))
    return LrcModel(encoder, params, config.dropout)

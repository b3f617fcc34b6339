"""Turn attention columns into ranked, renderable evidence per label."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .model import DlacOutput
from .tensor import Tensor
from .text import Document, LabelSet


class AlignmentError(ValueError):
    """Attention rows do not line up with the document's tokens."""


@dataclass
class EvidenceToken:
    token_index: int
    span: tuple          # (start, end) character offsets into the raw text
    score: float         # raw attention weight
    intensity: float     # score / top score among the listed tokens

    def to_dict(self) -> dict:
        return {"token_index": self.token_index,
                "span": [self.span[0], self.span[1]],
                "score": self.score,
                "intensity": self.intensity}


@dataclass
class Explanation:
    document_id: str
    code: str
    probability: float
    tokens: list  # EvidenceToken, scores descending

    def to_dict(self) -> dict:
        return {"document_id": self.document_id,
                "code": self.code,
                "probability": self.probability,
                "tokens": [t.to_dict() for t in self.tokens]}


def top_attention(A: Union[Tensor, np.ndarray], label: int, top_k: int) -> list:
    """The min(top_k, t) largest entries of attention column ``label``.

    Returned as (token index, score) pairs, scores descending; equal
    scores rank the lower token index first.
    """
    data = A.data if isinstance(A, Tensor) else np.asarray(A, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"attention must be a matrix, got shape {data.shape}")
    t, m = data.shape
    if not 0 <= label < m:
        raise IndexError(f"label index {label} outside [0, {m})")
    if top_k < 1:
        raise ValueError(f"top_k must be at least 1, got {top_k}")
    column = data[:, label]
    order = np.lexsort((np.arange(t), -column))
    return [(int(i), float(column[i])) for i in order[:min(top_k, t)]]


def build_explanation(document: Document, output: DlacOutput, label: int,
                      code: str, top_k: int = 10) -> Explanation:
    """Resolve a label's top attention weights to character spans.

    The attention matrix must cover exactly the document's tokens, or a
    truncated prefix of them when the encoder cut the document.
    """
    t = output.A.shape[0]
    n_tokens = len(document.tokens)
    if t > n_tokens or (t < n_tokens and not output.truncated):
        raise AlignmentError(f"attention covers {t} tokens but document {document.id!r} "
                             f"has {n_tokens}")
    ranked = top_attention(output.A, label, top_k)
    top_score = ranked[0][1]
    tokens = [EvidenceToken(token_index=i,
                            span=document.token_spans[i],
                            score=score,
                            intensity=score / top_score)
              for i, score in ranked]
    return Explanation(document_id=document.id,
                       code=code,
                       probability=float(output.probs.data[label]),
                       tokens=tokens)


def explain_prediction(document: Document, output: DlacOutput, label_set: LabelSet,
                       threshold: float = 0.5, top_k: int = 10,
                       include_all: bool = False) -> list:
    """Explanations for every label at or above the threshold (or all of them)."""
    probs = output.probs.data
    chosen = range(label_set.m) if include_all else np.flatnonzero(probs >= threshold)
    return [build_explanation(document, output, int(j), label_set.codes[int(j)], top_k)
            for j in chosen]

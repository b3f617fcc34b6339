"""Token-sequence encoders producing the embedding matrix the attention head consumes.

Three interchangeable strategies: a position-free bag of embeddings, a
single banded self-attention layer for mid-length documents, and a
chunk-and-average wrapper that extends either of those to long documents
without losing token resolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import tensor as tc
from .tensor import Tensor

ENCODER_KINDS = ("bag", "windowed_attention", "chunked")
INNER_KINDS = ("bag", "windowed_attention")

# Truncation limits when the config leaves max_len unset. The chunked
# wrapper feeds its inner encoder pieces of at most chunk_len tokens, so
# it can afford a far larger budget of its own.
_DEFAULT_MAX_LEN = {"bag": 512, "windowed_attention": 4096, "chunked": 8192}


class EncoderConfigError(ValueError):
    """Encoder configuration violates a structural constraint."""


@dataclass
class EncoderConfig:
    kind: str = "bag"
    d_e: int = 64
    vocab_size: int = 2
    max_len: Optional[int] = None
    window: int = 16
    chunk_len: int = 512
    inner_kind: str = "bag"

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise EncoderConfigError(f"unknown encoder kind {self.kind!r}")
        if self.d_e < 1:
            raise EncoderConfigError(f"d_e must be at least 1, got {self.d_e}")
        if self.vocab_size < 2:
            raise EncoderConfigError("vocab_size must cover the two reserved ids")
        if self.kind == "windowed_attention" and self.window < 1:
            raise EncoderConfigError(f"window must be at least 1, got {self.window}")
        if self.chunk_len < 2:
            raise EncoderConfigError(f"chunk_len must be at least 2, got {self.chunk_len}")
        if self.kind == "chunked" and self.inner_kind not in INNER_KINDS:
            raise EncoderConfigError(f"unknown inner encoder kind {self.inner_kind!r}")
        if self.max_len is None:
            self.max_len = _DEFAULT_MAX_LEN[self.kind]
        if self.max_len < 1:
            raise EncoderConfigError(f"max_len must be at least 1, got {self.max_len}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "d_e": self.d_e,
            "vocab_size": self.vocab_size,
            "max_len": self.max_len,
            "window": self.window,
            "chunk_len": self.chunk_len,
            "inner_kind": self.inner_kind,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EncoderConfig":
        return cls(**payload)


@dataclass
class EncoderOutput:
    """Per-token embeddings plus bookkeeping about how they were produced."""

    E: Tensor            # [t x d_e]
    coverage: np.ndarray  # chunks contributing to each position, >= 1
    truncated: bool


def chunk_spans(t: int, chunk_len: int = 512) -> list:
    """Split ``t`` positions into ceil(t/chunk_len) spans of equal length.

    Starts are evenly spaced and rounded; the first span begins at 0 and
    the last ends exactly at t, overlapping as needed. Every position is
    covered by at least one span.
    """
    if t < 1:
        raise ValueError(f"sequence length must be at least 1, got {t}")
    if chunk_len < 2:
        raise ValueError(f"chunk_len must be at least 2, got {chunk_len}")
    k = -(-t // chunk_len)
    if k == 1:
        return [(0, t)]
    length = chunk_len
    step = (t - length) / (k - 1)
    starts = [round(i * step) for i in range(k)]
    starts[-1] = t - length
    return [(s, s + length) for s in starts]


class BagEncoder:
    """Embedding lookup with no positional information."""

    def __init__(self, config: EncoderConfig, params: dict):
        self.config = config
        self.params = params

    def parameters(self) -> dict:
        return dict(self.params)

    def encode(self, token_ids: Sequence[int]) -> EncoderOutput:
        ids, truncated = _prepare_ids(token_ids, self.config.max_len)
        E = tc.embedding_rows(self.params["embedding"], ids)
        return EncoderOutput(E, np.ones(ids.size, dtype=np.int64), truncated)


class WindowedEncoder:
    """One self-attention layer where position i attends within +-window.

    Output rows are the input embeddings plus a softmax-weighted mix of
    value-projected rows from the band, so every row stays a residual
    update of its own embedding.
    """

    def __init__(self, config: EncoderConfig, params: dict):
        self.config = config
        self.params = params

    def parameters(self) -> dict:
        return dict(self.params)

    def encode(self, token_ids: Sequence[int]) -> EncoderOutput:
        ids, truncated = _prepare_ids(token_ids, self.config.max_len)
        t = ids.size
        X = tc.embedding_rows(self.params["embedding"], ids)
        Q = tc.matmul(X, self.params["query_proj"])
        K = tc.matmul(X, self.params["key_proj"])
        V = tc.matmul(X, self.params["value_proj"])
        scores = tc.scale(tc.matmul(Q, tc.transpose(K)), 1.0 / np.sqrt(self.config.d_e))
        band = _band_mask(t, self.config.window)
        A = tc.row_softmax(scores, mask=band)
        E = tc.add(X, tc.matmul(A, V))
        return EncoderOutput(E, np.ones(t, dtype=np.int64), truncated)


class ChunkedEncoder:
    """Encode overlapping spans independently and mean-pool per position.

    Each position's final embedding is the arithmetic mean of its
    embeddings across every chunk covering it, keeping the full [t x d_e]
    matrix so the attention head can still see individual tokens.
    """

    def __init__(self, config: EncoderConfig, inner):
        self.config = config
        self.inner = inner

    def parameters(self) -> dict:
        return self.inner.parameters()

    def encode(self, token_ids: Sequence[int]) -> EncoderOutput:
        ids, truncated = _prepare_ids(token_ids, self.config.max_len)
        t = ids.size
        spans = chunk_spans(t, self.config.chunk_len)
        if len(spans) == 1:
            inner_out = self.inner.encode(ids)
            return EncoderOutput(inner_out.E, np.ones(t, dtype=np.int64), truncated)
        coverage = np.zeros(t, dtype=np.int64)
        total = None
        for start, end in spans:
            coverage[start:end] += 1
            part = self.inner.encode(ids[start:end]).E
            padded = tc.pad_rows(part, start, t)
            total = padded if total is None else tc.add(total, padded)
        E = tc.div_rows(total, coverage.astype(np.float64))
        return EncoderOutput(E, coverage, truncated)


def build_encoder(config: EncoderConfig, rng: np.random.Generator):
    """Construct an encoder with freshly initialized trainable parameters."""
    if config.kind == "chunked":
        inner_config = EncoderConfig(
            kind=config.inner_kind,
            d_e=config.d_e,
            vocab_size=config.vocab_size,
            max_len=config.chunk_len,
            window=config.window,
            chunk_len=config.chunk_len,
        )
        return ChunkedEncoder(config, build_encoder(inner_config, rng))
    embedding = Tensor(rng.normal(0.0, 0.1, size=(config.vocab_size, config.d_e)),
                       requires_grad=True)
    if config.kind == "bag":
        return BagEncoder(config, {"embedding": embedding})
    proj_scale = 1.0 / np.sqrt(config.d_e)
    params = {
        "embedding": embedding,
        "query_proj": Tensor(rng.normal(0.0, proj_scale, size=(config.d_e, config.d_e)),
                             requires_grad=True),
        "key_proj": Tensor(rng.normal(0.0, proj_scale, size=(config.d_e, config.d_e)),
                           requires_grad=True),
        "value_proj": Tensor(rng.normal(0.0, proj_scale, size=(config.d_e, config.d_e)),
                             requires_grad=True),
    }
    return WindowedEncoder(config, params)


def _prepare_ids(token_ids: Sequence[int], max_len: int):
    ids = np.asarray(token_ids, dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise ValueError("token_ids must be a non-empty 1-D sequence")
    truncated = ids.size > max_len
    return ids[:max_len], truncated


def _band_mask(t: int, window: int) -> np.ndarray:
    offsets = np.abs(np.arange(t)[:, None] - np.arange(t)[None, :])
    return offsets <= window

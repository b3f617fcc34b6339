"""Label-attention classification head and the mean-pool logistic baseline.

The head turns a document's token embedding matrix into one attention
column per label, pools a per-label contextual embedding from it, and
scores each label with its own linear classifier. The baseline ignores
labels entirely until the final linear layer: it mean-pools the token
embeddings and applies one logistic regression per label.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import tensor as tc
from .tensor import Tensor
from .text import UNK_ID, EmptyDocumentError, LabelSet, Vocabulary, preprocess


class DescriptionInitError(ValueError):
    """A label description produced no usable tokens for initialization."""


@dataclass
class DlacParams:
    """Trainable pieces of the attention head.

    U projects token embeddings into the label-query space, D holds one
    trainable query row per label (seeded from that label's text
    description), and W, b score each label's pooled embedding.
    """

    U: Tensor  # [d_e x d_a]
    D: Tensor  # [m x d_a]
    W: Tensor  # [m x d_e]
    b: Tensor  # [m]

    def parameters(self) -> dict:
        return {"U": self.U, "D": self.D, "W": self.W, "b": self.b}


@dataclass
class LrcParams:
    W: Tensor  # [m x d_e]
    b: Tensor  # [m]

    def parameters(self) -> dict:
        return {"W": self.W, "b": self.b}


@dataclass
class DlacOutput:
    """Attention, pooled embeddings and probabilities for one document."""

    A: Tensor      # [t x m], each column sums to 1
    C: Tensor      # [d_e x m]
    probs: Tensor  # [m], entries in (0, 1)
    truncated: bool = False


@dataclass
class LrcOutput:
    probs: Tensor  # [m]
    truncated: bool = False


def init_description_embeddings(label_set: LabelSet, vocab: Vocabulary,
                                token_table: np.ndarray) -> Tensor:
    """Seed one trainable row per label from its description's token vectors.

    Row j is the mean of ``token_table`` rows for the description's known
    tokens (unknowns are skipped). A description with no known tokens
    cannot be seeded and raises ``DescriptionInitError`` naming the code.
    """
    table = np.asarray(token_table, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] != vocab.size:
        raise tc.ShapeError(f"token table shape {table.shape} does not cover vocabulary "
                            f"of {vocab.size}")
    rows = np.zeros((label_set.m, table.shape[1]))
    for j, code in enumerate(label_set.codes):
        description = label_set.descriptions[j]
        try:
            tokens, _ = preprocess(description)
        except EmptyDocumentError:
            tokens = []
        ids = [vocab.id_for(tok) for tok in tokens]
        known = [i for i in ids if i != UNK_ID]
        if not known:
            raise DescriptionInitError(
                f"description for label {code!r} has no known tokens")
        rows[j] = table[known].mean(axis=0)
    return Tensor(rows, requires_grad=True)


def attention(E: Tensor, params: DlacParams) -> Tensor:
    """Per-label attention over tokens: softmax down each column of E@U@D^T."""
    scores = tc.matmul(tc.matmul(E, params.U), tc.transpose(params.D))
    return tc.column_softmax(scores)


def contextual(E: Tensor, A: Tensor) -> Tensor:
    """Pool one embedding per label: column j of E^T@A is a convex mix of E's rows."""
    return tc.matmul(tc.transpose(E), A)


def classify(C: Tensor, params: DlacParams) -> Tensor:
    """Score each label's pooled embedding with its own weight vector."""
    scores = tc.add(tc.rowwise_dot(params.W, tc.transpose(C)), params.b)
    return tc.sigmoid(scores)


def lrc_forward(E: Tensor, params: LrcParams) -> Tensor:
    """Mean-pool the token embeddings and apply per-label logistic regression."""
    pooled = tc.mean_rows(E)
    return tc.sigmoid(tc.add(tc.matmul(params.W, pooled), params.b))


def predict_labels(probs: Union[Tensor, np.ndarray, Sequence], threshold: float = 0.5) -> np.ndarray:
    """Binarize probabilities; a probability exactly at the threshold counts as positive."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be inside (0, 1), got {threshold}")
    p = probs.data if isinstance(probs, Tensor) else np.asarray(probs, dtype=np.float64)
    return (p >= threshold).astype(np.uint8)


class DlacModel:
    """Encoder plus attention head, with dropout applied around the head."""

    def __init__(self, encoder, params: DlacParams, dropout_p: float = 0.0):
        self.encoder = encoder
        self.params = params
        self.dropout_p = dropout_p

    def forward(self, token_ids: Sequence[int], training: bool = False,
                rng: Optional[np.random.Generator] = None) -> DlacOutput:
        encoded = self.encoder.encode(token_ids)
        E = tc.dropout(encoded.E, self.dropout_p, training, rng)
        A = attention(E, self.params)
        C = tc.dropout(contextual(E, A), self.dropout_p, training, rng)
        probs = classify(C, self.params)
        return DlacOutput(A=A, C=C, probs=probs, truncated=encoded.truncated)

    def parameters(self) -> dict:
        named = {f"encoder.{k}": v for k, v in self.encoder.parameters().items()}
        named.update({f"head.{k}": v for k, v in self.params.parameters().items()})
        return named


class LrcModel:
    """Encoder plus mean-pool logistic baseline."""

    def __init__(self, encoder, params: LrcParams, dropout_p: float = 0.0):
        self.encoder = encoder
        self.params = params
        self.dropout_p = dropout_p

    def forward(self, token_ids: Sequence[int], training: bool = False,
                rng: Optional[np.random.Generator] = None) -> LrcOutput:
        encoded = self.encoder.encode(token_ids)
        E = tc.dropout(encoded.E, self.dropout_p, training, rng)
        return LrcOutput(probs=lrc_forward(E, self.params), truncated=encoded.truncated)

    def parameters(self) -> dict:
        named = {f"encoder.{k}": v for k, v in self.encoder.parameters().items()}
        named.update({f"head.{k}": v for k, v in self.params.parameters().items()})
        return named


def build_dlac_model(encoder_config, label_set: LabelSet, vocab: Vocabulary,
                     d_a: int, rng: np.random.Generator,
                     dropout_p: float = 0.0) -> DlacModel:
    """Construct a model with fresh encoder parameters and a description-seeded head."""
    from .encoders import build_encoder

    if d_a < 1:
        raise ValueError(f"d_a must be at least 1, got {d_a}")
    encoder = build_encoder(encoder_config, rng)
    d_e = encoder_config.d_e
    m = label_set.m
    desc_table = rng.normal(0.0, 0.1, size=(vocab.size, d_a))
    D = init_description_embeddings(label_set, vocab, desc_table)
    scale = 1.0 / np.sqrt(d_e)
    params = DlacParams(
        U=Tensor(rng.normal(0.0, scale, size=(d_e, d_a)), requires_grad=True),
        D=D,
        W=Tensor(rng.normal(0.0, scale, size=(m, d_e)), requires_grad=True),
        b=Tensor(np.zeros(m), requires_grad=True),
    )
    return DlacModel(encoder, params, dropout_p)


def build_lrc_model(encoder_config, m: int, rng: np.random.Generator,
                    dropout_p: float = 0.0) -> LrcModel:
    from .encoders import build_encoder

    if m < 1:
        raise ValueError(f"label count must be at least 1, got {m}")
    encoder = build_encoder(encoder_config, rng)
    d_e = encoder_config.d_e
    params = LrcParams(
        W=Tensor(rng.normal(0.0, 1.0 / np.sqrt(d_e), size=(m, d_e)), requires_grad=True),
        b=Tensor(np.zeros(m), requires_grad=True),
    )
    return LrcModel(encoder, params, dropout_p)

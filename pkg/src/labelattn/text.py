"""Text preprocessing, vocabulary and corpus handling.

Includes a synthetic planted-evidence corpus generator: every label owns a
disjoint set of keyword tokens, a document carries a label exactly when at
least one of that label's keywords was planted into it, and the planted
positions are kept so explanation quality can be measured objectively.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")


class EmptyDocumentError(ValueError):
    """Preprocessing removed every token of a document."""


class CorpusFormatError(ValueError):
    """A corpus or label file record could not be parsed."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SyntheticConfigError(ValueError):
    """Synthetic corpus configuration is infeasible."""


class SplitError(ValueError):
    """A requested corpus split cannot be formed."""


def preprocess(raw_text: str) -> tuple[list[str], list[tuple[int, int]]]:
    """Lowercase, split on every non-alphanumeric character, drop digits-only tokens.

    Returns the surviving tokens and their (start, end) character spans into
    the original text. Raises ``EmptyDocumentError`` when nothing survives.
    """
    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    for m in _TOKEN_RE.finditer(raw_text):
        tok = m.group().lower()
        if tok.isdigit():
            continue
        tokens.append(tok)
        spans.append(m.span())
    if not tokens:
        raise EmptyDocumentError("no tokens survive preprocessing")
    return tokens, spans


class Vocabulary:
    """Token/id bijection with fixed PAD=0 and UNK=1 specials."""

    def __init__(self, tokens: Sequence[str]):
        self.id_to_token: list[str] = [PAD_TOKEN, UNK_TOKEN, *tokens]
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocabulary")

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def id_for(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        get = self.token_to_id.get
        return [get(t, UNK_ID) for t in tokens]

    def to_dict(self) -> dict:
        return {"tokens": self.id_to_token[2:]}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(d["tokens"])


def build_vocabulary(token_lists: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Assign ids by descending frequency, ties broken lexicographically."""
    counts: dict[str, int] = {}
    for tokens in token_lists:
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
    kept = sorted((t for t, c in counts.items() if c >= min_count),
                  key=lambda t: (-counts[t], t))
    return Vocabulary(kept)


class LabelSet:
    """Ordered code/description pairs; list position defines the label index."""

    def __init__(self, pairs: Sequence[tuple[str, str]]):
        self.codes: list[str] = [c for c, _ in pairs]
        self.descriptions: list[str] = [d for _, d in pairs]
        if len(set(self.codes)) != len(self.codes):
            raise ValueError("label codes must be unique")
        if any(not d for d in self.descriptions):
            raise ValueError("label descriptions must be non-empty")
        self._index = {c: i for i, c in enumerate(self.codes)}

    @property
    def m(self) -> int:
        return len(self.codes)

    def __len__(self) -> int:
        return len(self.codes)

    def index(self, code: str) -> int:
        return self._index[code]

    def __contains__(self, code: str) -> bool:
        return code in self._index

    def vector(self, codes: Iterable[str]) -> np.ndarray:
        y = np.zeros(self.m, dtype=np.uint8)
        for c in codes:
            y[self._index[c]] = 1
        return y

    def to_records(self) -> list[dict]:
        return [{"code": c, "description": d} for c, d in zip(self.codes, self.descriptions)]

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> "LabelSet":
        return cls([(r["code"], r["description"]) for r in records])


@dataclass
class CorpusRecord:
    """One raw corpus entry as stored on disk."""
    id: str
    text: str
    codes: list[str]


@dataclass
class Document:
    """A preprocessed record: token ids, their spans, and the label vector."""
    id: str
    raw_text: str
    tokens: list[int]
    token_spans: list[tuple[int, int]]
    labels: np.ndarray

    def __post_init__(self):
        if len(self.tokens) != len(self.token_spans) or not self.tokens:
            raise ValueError(f"document {self.id}: tokens and spans must be non-empty and equal length")
        n = len(self.raw_text)
        prev_end = 0
        for s, e in self.token_spans:
            if not (0 <= s < e <= n) or s < prev_end:
                raise ValueError(f"document {self.id}: spans must be in-bounds, increasing and disjoint")
            prev_end = e


def build_documents(records: Sequence[CorpusRecord], vocab: Vocabulary,
                    label_set: LabelSet) -> list[Document]:
    docs = []
    for rec in records:
        tokens, spans = preprocess(rec.text)
        docs.append(Document(
            id=rec.id,
            raw_text=rec.text,
            tokens=vocab.encode(tokens),
            token_spans=spans,
            labels=label_set.vector(rec.codes),
        ))
    return docs


_RECORD_KEYS = ("id", "text", "codes")


def save_corpus(records: Sequence[CorpusRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({"id": rec.id, "text": rec.text, "codes": rec.codes}) + "\n")


def load_corpus(path) -> list[CorpusRecord]:
    """Read line-delimited corpus records; parse failures name the line."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise CorpusFormatError(f"invalid JSON ({err.msg})", lineno) from err
            for key in _RECORD_KEYS:
                if key not in obj:
                    raise CorpusFormatError(f"record missing '{key}'", lineno)
            if not isinstance(obj["codes"], list):
                raise CorpusFormatError("'codes' must be a list", lineno)
            records.append(CorpusRecord(id=str(obj["id"]), text=obj["text"],
                                        codes=[str(c) for c in obj["codes"]]))
    return records


def save_label_set(label_set: LabelSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in label_set.to_records():
            fh.write(json.dumps(rec) + "\n")


def load_label_set(path) -> LabelSet:
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise CorpusFormatError(f"invalid JSON ({err.msg})", lineno) from err
            if "code" not in obj or "description" not in obj:
                raise CorpusFormatError("label record needs 'code' and 'description'", lineno)
            pairs.append((str(obj["code"]), str(obj["description"])))
    return LabelSet(pairs)


@dataclass
class CorpusSplit:
    """Disjoint train/validation/test document id lists covering the corpus."""
    train: list[str]
    validation: list[str]
    test: list[str]

    def split_of(self) -> dict[str, str]:
        assignment = {}
        for name, ids in (("train", self.train), ("validation", self.validation), ("test", self.test)):
            for i in ids:
                assignment[i] = name
        return assignment


def split_corpus(records: Sequence, ratios: tuple[float, float, float],
                 seed: int) -> CorpusSplit:
    """Deterministic shuffled split into train/validation/test id lists.

    A part may only be empty when its ratio is exactly 0; a positive ratio
    that rounds to zero documents raises ``SplitError``.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    if any(r < 0 for r in ratios):
        raise ValueError(f"split ratios must be non-negative, got {ratios}")
    n = len(records)
    order = np.random.default_rng(seed).permutation(n)
    cut1 = round(n * ratios[0])
    cut2 = round(n * (ratios[0] + ratios[1]))
    parts = (order[:cut1], order[cut1:cut2], order[cut2:])
    for name, ratio, part in zip(("train", "validation", "test"), ratios, parts):
        if ratio > 0 and len(part) == 0:
            raise SplitError(f"{name} ratio {ratio} yields no documents out of {n}")
    ids = [records[i].id for i in order]
    return CorpusSplit(train=ids[:cut1], validation=ids[cut1:cut2], test=ids[cut2:])


def save_split(split: CorpusSplit, path) -> None:
    payload = {"train": split.train, "validation": split.validation, "test": split.test}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_split(path) -> CorpusSplit:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    missing = {"train", "validation", "test"} - set(payload)
    if missing:
        raise SplitError(f"split file lacks parts: {sorted(missing)}")
    return CorpusSplit(train=list(payload["train"]),
                       validation=list(payload["validation"]),
                       test=list(payload["test"]))


# Synthetic corpus ---------------------------------------------------------

_EVIDENCE_ONSETS = "bdglmnprst"
_NOISE_ONSETS = "cfhjkvwz"
_VOWELS = "aeiou"


def _word_pool(onsets: str) -> list[str]:
    syllables = [c + v for c in onsets for v in _VOWELS]
    return [a + b for a in syllables for b in syllables]


@dataclass
class SyntheticConfig:
    """Knobs for the planted-evidence generator."""
    m: int = 20
    n_docs: int = 1000
    doc_len_range: tuple[int, int] = (200, 600)
    evidence_per_label: int = 3
    noise_vocab_size: int = 500
    label_rate: float = 4.77          # lambda of the 1 + Poisson cardinality draw
    plants_range: tuple[int, int] = (1, 3)  # keyword occurrences per active label

    def validate(self) -> None:
        if self.m < 2:
            raise SyntheticConfigError(f"m must be >= 2, got {self.m}")
        lo, hi = self.doc_len_range
        if not (50 <= lo <= hi <= 8000):
            raise SyntheticConfigError(f"doc_len_range must lie within [50, 8000], got {self.doc_len_range}")
        if self.evidence_per_label < 1:
            raise SyntheticConfigError("evidence_per_label must be >= 1")
        evidence_pool = _word_pool(_EVIDENCE_ONSETS)
        if self.m * self.evidence_per_label > len(evidence_pool):
            raise SyntheticConfigError(
                f"{self.m} labels x {self.evidence_per_label} keywords exceed the "
                f"{len(evidence_pool)}-word evidence pool; keyword sets would overlap")
        noise_pool = _word_pool(_NOISE_ONSETS)
        if not (1 <= self.noise_vocab_size <= len(noise_pool)):
            raise SyntheticConfigError(
                f"noise_vocab_size must be in [1, {len(noise_pool)}], got {self.noise_vocab_size}")
        if self.label_rate < 0:
            raise SyntheticConfigError("label_rate must be non-negative")
        p_lo, p_hi = self.plants_range
        if not (1 <= p_lo <= p_hi):
            raise SyntheticConfigError(f"plants_range must satisfy 1 <= lo <= hi, got {self.plants_range}")

    def to_dict(self) -> dict:
        return {
            "m": self.m, "n_docs": self.n_docs, "doc_len_range": list(self.doc_len_range),
            "evidence_per_label": self.evidence_per_label,
            "noise_vocab_size": self.noise_vocab_size, "label_rate": self.label_rate,
            "plants_range": list(self.plants_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticConfig":
        cfg = cls(**{**d,
                     "doc_len_range": tuple(d.get("doc_len_range", (200, 600))),
                     "plants_range": tuple(d.get("plants_range", (1, 3)))})
        return cfg


@dataclass
class SyntheticCorpus:
    """Generator output: records plus the ground-truth evidence bookkeeping."""
    records: list[CorpusRecord]
    label_set: LabelSet
    evidence_keywords: dict[str, list[str]]
    planted_positions: list[dict[str, list[int]]] = field(repr=False)

    def evidence_metadata(self) -> dict:
        return {
            "keywords": self.evidence_keywords,
            "planted": {rec.id: planted for rec, planted in zip(self.records, self.planted_positions)},
        }


def generate_synthetic_corpus(config: SyntheticConfig, seed: int) -> SyntheticCorpus:
    """Generate a corpus where label truth is decided by planted keywords.

    Pure function of (config, seed): each document draws from its own rng
    stream derived from (seed, doc index), so the output is reproducible and
    independent of generation order.
    """
    config.validate()
    evidence_pool = _word_pool(_EVIDENCE_ONSETS)
    noise_pool = _word_pool(_NOISE_ONSETS)

    codes = [f"C{j:02d}" for j in range(config.m)]
    keywords = {}
    for j, code in enumerate(codes):
        base = j * config.evidence_per_label
        keywords[code] = evidence_pool[base:base + config.evidence_per_label]
    label_set = LabelSet([
        (code, f"disorder with {' '.join(keywords[code])} involvement")
        for code in codes
    ])
    noise_words = noise_pool[:config.noise_vocab_size]

    lo, hi = config.doc_len_range
    p_lo, p_hi = config.plants_range
    records = []
    planted_all = []
    for i in range(config.n_docs):
        rng = np.random.default_rng([seed, i])
        t = int(rng.integers(lo, hi + 1))
        cardinality = min(config.m, 1 + int(rng.poisson(config.label_rate)), t // (2 * p_hi))
        cardinality = max(1, cardinality)
        active = np.sort(rng.choice(config.m, size=cardinality, replace=False))

        tokens = [noise_words[k] for k in rng.integers(0, len(noise_words), size=t)]
        plant_counts = rng.integers(p_lo, p_hi + 1, size=cardinality)
        positions = rng.choice(t, size=int(plant_counts.sum()), replace=False)
        planted: dict[str, list[int]] = {}
        cursor = 0
        for j, count in zip(active, plant_counts):
            code = codes[j]
            slots = positions[cursor:cursor + count]
            cursor += count
            choices = rng.integers(0, config.evidence_per_label, size=count)
            for pos, pick in zip(slots, choices):
                tokens[int(pos)] = keywords[code][int(pick)]
            planted[code] = sorted(int(p) for p in slots)

        records.append(CorpusRecord(
            id=f"d{i:05d}",
            text=" ".join(tokens),
            codes=[codes[j] for j in active],
        ))
        planted_all.append(planted)

    return SyntheticCorpus(records=records, label_set=label_set,
                           evidence_keywords=keywords, planted_positions=planted_all)

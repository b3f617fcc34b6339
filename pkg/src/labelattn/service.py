"""HTTP review service: prediction with evidence, document browsing, decisions.

One immutable checkpoint is loaded at startup and shared across requests.
Review decisions append to a line-delimited JSON file under a lock, so
acknowledged records survive restarts and concurrent writers.
"""

from __future__ import annotations

import datetime
import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import explain as ex
from .model import DlacModel
from .text import (Document, EmptyDocumentError, build_documents,
                   load_corpus, load_split, preprocess)
from .training import CHECKPOINT_FORMAT_VERSION, load_checkpoint

VERDICTS = ("accepted", "rejected")
MAX_PAGE_SIZE = 100


@dataclass
class ServiceConfig:
    checkpoint: str
    corpus: Optional[str] = None
    splits: Optional[str] = None
    decisions: str = "decisions.jsonl"
    host: str = "127.0.0.1"
    port: int = 8000
    threshold: float = 0.5
    top_k: int = 10
    page_size: int = 20
    cors_origins: tuple = ("*",)

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be inside (0, 1), got {self.threshold}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be at least 1, got {self.top_k}")
        if not 1 <= self.page_size <= MAX_PAGE_SIZE:
            raise ValueError(f"page_size must be in [1, {MAX_PAGE_SIZE}]")


class DecisionStore:
    """Append-only JSONL persistence for review decisions."""

    def __init__(self, path):
        self.path = str(path)
        self._lock = threading.Lock()

    def append(self, record: dict) -> dict:
        line = json.dumps(record, sort_keys=True)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        return record

    def all(self) -> list:
        if not os.path.exists(self.path):
            return []
        records = []
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(json.loads(line))
        return records

    def for_document(self, document_id: str) -> list:
        return [r for r in self.all() if r["document_id"] == document_id]


@dataclass
class AppState:
    """Everything a request handler needs, loaded once."""

    config: ServiceConfig
    model: object = None
    train_config: object = None
    vocab: object = None
    label_set: object = None
    documents: dict = field(default_factory=dict)   # id -> Document
    doc_order: list = field(default_factory=list)   # ids, sorted
    splits: dict = field(default_factory=dict)      # id -> split name
    store: Optional[DecisionStore] = None

    @property
    def loaded(self) -> bool:
        return self.model is not None


def load_state(config: ServiceConfig) -> AppState:
    checkpoint = load_checkpoint(config.checkpoint)
    state = AppState(config=config,
                     model=checkpoint.model,
                     train_config=checkpoint.config,
                     vocab=checkpoint.vocab,
                     label_set=checkpoint.label_set,
                     store=DecisionStore(config.decisions))
    if config.corpus:
        records = load_corpus(config.corpus)
        docs = build_documents(records, checkpoint.vocab, checkpoint.label_set)
        state.documents = {doc.id: doc for doc in docs}
        state.doc_order = sorted(state.documents)
    if config.splits:
        state.splits = load_split(config.splits).split_of()
    return state


class PredictRequest(BaseModel):
    text: Optional[str] = None
    document_id: Optional[str] = None
    threshold: Optional[float] = None
    top_k: Optional[int] = None


class DecisionRequest(BaseModel):
    document_id: str
    code: str
    verdict: str
    reviewer: str
    probability: Optional[float] = None
    threshold: Optional[float] = None


def _bad_request(message: str) -> HTTPException:
    return HTTPException(status_code=400, detail=message)


def _require_model(state: AppState) -> None:
    if not state.loaded:
        raise HTTPException(status_code=503, detail="model not loaded")


def _adhoc_document(text: str, vocab) -> Document:
    tokens, spans = preprocess(text)
    return Document(id="adhoc", raw_text=text, tokens=vocab.encode(tokens),
                    token_spans=spans, labels=np.zeros(0, dtype=np.uint8))


def predict_payload(model, label_set, document: Document,
                    threshold: float, top_k: int) -> dict:
    """Codes above threshold, sorted by descending probability, with evidence."""
    output = model.forward(document.tokens)
    probs = output.probs.data
    chosen = [int(j) for j in np.argsort(-probs, kind="stable") if probs[j] >= threshold]
    attention_available = isinstance(model, DlacModel)
    codes = []
    for j in chosen:
        entry = {"code": label_set.codes[j], "probability": float(probs[j])}
        if attention_available:
            explanation = ex.build_explanation(document, output, j,
                                               label_set.codes[j], top_k)
            entry["explanation"] = {"tokens": [t.to_dict() for t in explanation.tokens]}
        else:
            entry["explanation"] = None
        codes.append(entry)
    return {"codes": codes, "truncated": bool(output.truncated)}


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(title="label attention review service")
    if state.config.cors_origins:
        app.add_middleware(CORSMiddleware,
                           allow_origins=list(state.config.cors_origins),
                           allow_methods=["*"],
                           allow_headers=["*"])

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, err: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(err.errors())})

    @app.get("/health")
    def health():
        if not state.loaded:
            return JSONResponse(status_code=503, content={"status": "unavailable"})
        return {"status": "ok",
                "checkpoint_version": CHECKPOINT_FORMAT_VERSION,
                "m": state.label_set.m,
                "encoder_kind": state.train_config.encoder.kind}

    @app.post("/predict")
    def predict(body: PredictRequest):
        _require_model(state)
        if (body.text is None) == (body.document_id is None):
            raise _bad_request("provide exactly one of 'text' or 'document_id'")
        threshold = body.threshold if body.threshold is not None else state.config.threshold
        if not 0.0 < threshold < 1.0:
            raise _bad_request(f"threshold must be inside (0, 1), got {threshold}")
        top_k = body.top_k if body.top_k is not None else state.config.top_k
        if top_k < 1:
            raise _bad_request(f"top_k must be at least 1, got {top_k}")
        if body.text is not None:
            try:
                document = _adhoc_document(body.text, state.vocab)
            except EmptyDocumentError as err:
                raise _bad_request(str(err))
        else:
            document = state.documents.get(body.document_id)
            if document is None:
                raise HTTPException(status_code=404,
                                    detail=f"unknown document {body.document_id!r}")
        return predict_payload(state.model, state.label_set, document, threshold, top_k)

    @app.get("/documents")
    def list_documents(split: Optional[str] = None, page: int = 0):
        if page < 0:
            raise _bad_request(f"page must be non-negative, got {page}")
        ids = state.doc_order
        if split is not None:
            ids = [i for i in ids if state.splits.get(i, "unassigned") == split]
        size = state.config.page_size
        window = ids[page * size:(page + 1) * size]
        documents = []
        for doc_id in window:
            doc = state.documents[doc_id]
            documents.append({"id": doc_id,
                              "split": state.splits.get(doc_id, "unassigned"),
                              "n_tokens": len(doc.tokens),
                              "codes": _true_codes(state, doc)})
        return {"documents": documents, "page": page,
                "page_size": size, "total": len(ids)}

    @app.get("/documents/{document_id}")
    def get_document(document_id: str):
        doc = state.documents.get(document_id)
        if doc is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown document {document_id!r}")
        return {"id": doc.id,
                "text": doc.raw_text,
                "codes": _true_codes(state, doc),
                "split": state.splits.get(document_id, "unassigned")}

    @app.post("/decisions", status_code=201)
    def post_decision(body: DecisionRequest):
        if body.verdict not in VERDICTS:
            raise _bad_request(f"verdict must be one of {VERDICTS}, got {body.verdict!r}")
        if not body.reviewer.strip():
            raise _bad_request("reviewer must be a non-empty string")
        if state.documents and body.document_id not in state.documents:
            raise HTTPException(status_code=404,
                                detail=f"unknown document {body.document_id!r}")
        if state.label_set is not None and body.code not in state.label_set:
            raise HTTPException(status_code=404, detail=f"unknown code {body.code!r}")
        now_ns = time.time_ns()
        stamp = datetime.datetime.fromtimestamp(now_ns / 1e9,
                                                tz=datetime.timezone.utc).isoformat()
        record = {"document_id": body.document_id,
                  "code": body.code,
                  "verdict": body.verdict,
                  "reviewer": body.reviewer,
                  "probability": body.probability,
                  "threshold": body.threshold,
                  "timestamp": stamp,
                  "timestamp_ns": now_ns}
        return state.store.append(record)

    @app.get("/decisions")
    def get_decisions(document_id: Optional[str] = None):
        if document_id is None:
            return {"decisions": state.store.all()}
        return {"decisions": state.store.for_document(document_id)}

    return app


def _true_codes(state: AppState, doc: Document) -> list:
    return [state.label_set.codes[j] for j in np.flatnonzero(doc.labels)]


def serve_blocking(config: ServiceConfig) -> None:
    """Load everything and block serving HTTP."""
    import uvicorn

    app = create_app(load_state(config))
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")

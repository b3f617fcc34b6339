"""HTTP contract tests for the review service."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from labelattn import text as tx
from labelattn import training as tr
from labelattn.service import (AppState, DecisionStore, ServiceConfig,
                               create_app, load_state)


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    """One small trained checkpoint, corpus and split file shared per module."""
    root = tmp_path_factory.mktemp("svc")
    corpus = tx.generate_synthetic_corpus(
        tx.SyntheticConfig(m=4, n_docs=40, doc_len_range=(60, 100), label_rate=1.0),
        seed=11)
    tx.save_corpus(corpus.records, root / "corpus.jsonl")
    split = tx.split_corpus(corpus.records, (0.8, 0.1, 0.1), seed=11)
    tx.save_split(split, root / "splits.json")

    vocab = tx.build_vocabulary(tx.preprocess(r.text)[0] for r in corpus.records)
    docs = tx.build_documents(corpus.records, vocab, corpus.label_set)
    examples = tr.examples_from_documents(docs)
    config = tr.TrainConfig(lr=1e-2, batch_size=8, epochs=4, folds=2, dropout=0.0,
                            early_stop_patience=4, seed=11, head="dlac", d_a=6,
                            encoder=tx_encoder(vocab.size))
    model = tr.build_model(config, corpus.label_set, vocab, np.random.default_rng(11))
    by_id = {d.id: d for d in docs}
    train_ex = [e for e in examples if e.id in set(split.train)]
    val_ex = [e for e in examples if e.id in set(split.validation)]
    history = tr.train_model(model, train_ex, val_ex, config, np.random.default_rng(12))
    tr.save_checkpoint(model, config, vocab, corpus.label_set, history,
                       root / "checkpoint.json")
    return root, corpus, by_id


def tx_encoder(vocab_size):
    from labelattn.encoders import EncoderConfig
    return EncoderConfig(kind="bag", d_e=8, vocab_size=vocab_size)


@pytest.fixture()
def client(artifacts, tmp_path):
    root, _, _ = artifacts
    config = ServiceConfig(checkpoint=str(root / "checkpoint.json"),
                           corpus=str(root / "corpus.jsonl"),
                           splits=str(root / "splits.json"),
                           decisions=str(tmp_path / "decisions.jsonl"),
                           page_size=10)
    return TestClient(create_app(load_state(config)))


def any_document_id(client, split=None):
    url = "/documents" if split is None else f"/documents?split={split}"
    return client.get(url).json()["documents"][0]["id"]


class TestHealth:
    def test_ok_fields_match_checkpoint(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ok"
        assert body["checkpoint_version"] == tr.CHECKPOINT_FORMAT_VERSION
        assert body["m"] == 4
        assert body["encoder_kind"] == "bag"

    def test_unavailable_before_load(self, artifacts, tmp_path):
        root, _, _ = artifacts
        config = ServiceConfig(checkpoint=str(root / "checkpoint.json"),
                               decisions=str(tmp_path / "d.jsonl"))
        bare = TestClient(create_app(AppState(config=config)))
        assert bare.get("/health").status_code == 503
        assert bare.post("/predict", json={"text": "hello"}).status_code == 503


class TestPredict:
    def test_codes_sorted_by_descending_probability(self, client):
        doc_id = any_document_id(client)
        r = client.post("/predict", json={"document_id": doc_id, "threshold": 0.01})
        assert r.status_code == 200
        probs = [c["probability"] for c in r.json()["codes"]]
        assert probs == sorted(probs, reverse=True)
        assert all(p >= 0.01 for p in probs)

    def test_identical_request_gives_identical_body(self, client):
        doc_id = any_document_id(client)
        payload = {"document_id": doc_id, "threshold": 0.05, "top_k": 4}
        first = client.post("/predict", json=payload)
        second = client.post("/predict", json=payload)
        assert first.content == second.content

    def test_near_one_threshold_gives_empty_codes(self, client):
        r = client.post("/predict", json={"text": "a few plain words", "threshold": 0.999})
        assert r.status_code == 200
        assert r.json()["codes"] == []

    def test_empty_text_rejected(self, client):
        r = client.post("/predict", json={"text": "   12 34  "})
        assert r.status_code == 400

    def test_text_and_document_id_together_rejected(self, client):
        doc_id = any_document_id(client)
        r = client.post("/predict", json={"text": "hi", "document_id": doc_id})
        assert r.status_code == 400
        assert client.post("/predict", json={}).status_code == 400

    def test_unknown_document_rejected(self, client):
        assert client.post("/predict", json={"document_id": "nope"}).status_code == 404

    def test_threshold_and_top_k_validated(self, client):
        assert client.post("/predict", json={"text": "hi", "threshold": 1.5}).status_code == 400
        assert client.post("/predict", json={"text": "hi", "top_k": 0}).status_code == 400

    def test_non_json_body_rejected(self, client):
        r = client.post("/predict", content=b"not json",
                        headers={"content-type": "application/json"})
        assert r.status_code == 400

    def test_explanation_spans_resolve_to_document_text(self, client):
        doc_id = any_document_id(client)
        text = client.get(f"/documents/{doc_id}").json()["text"]
        tokens, _ = tx.preprocess(text)
        r = client.post("/predict", json={"document_id": doc_id, "threshold": 0.01})
        codes = r.json()["codes"]
        assert codes, "tiny threshold should return at least one code"
        for entry in codes:
            intensities = [t["intensity"] for t in entry["explanation"]["tokens"]]
            assert intensities[0] == 1.0
            for item in entry["explanation"]["tokens"]:
                s, e = item["span"]
                assert 0 <= s < e <= len(text)
                assert text[s:e].lower() == tokens[item["token_index"]]


class TestDocuments:
    def test_listing_is_sorted_and_paged(self, client):
        first = client.get("/documents?page=0").json()
        assert first["total"] == 40
        assert len(first["documents"]) == 10
        ids = [d["id"] for d in first["documents"]]
        assert ids == sorted(ids)
        second = client.get("/documents?page=1").json()
        assert ids[-1] < second["documents"][0]["id"]

    def test_split_filter_partitions_corpus(self, client):
        totals = {s: client.get(f"/documents?split={s}").json()["total"]
                  for s in ("train", "validation", "test")}
        assert sum(totals.values()) == 40
        assert totals["train"] == 32

    def test_page_beyond_end_is_empty_200(self, client):
        r = client.get("/documents?page=99")
        assert r.status_code == 200
        assert r.json()["documents"] == []

    def test_negative_page_rejected(self, client):
        assert client.get("/documents?page=-1").status_code == 400

    def test_listed_id_is_fetchable(self, client):
        listed = client.get("/documents?split=test").json()["documents"][0]
        r = client.get(f"/documents/{listed['id']}")
        assert r.status_code == 200
        body = r.json()
        assert body["split"] == "test"
        assert len(body["codes"]) == len(listed["codes"])
        assert body["text"]

    def test_unknown_id_404(self, client):
        assert client.get("/documents/zzz").status_code == 404


class TestDecisions:
    def decision(self, client, **overrides):
        body = {"document_id": any_document_id(client), "code": "C00",
                "verdict": "accepted", "reviewer": "r1",
                "probability": 0.8, "threshold": 0.5}
        body.update(overrides)
        return client.post("/decisions", json=body)

    def test_round_trip_with_server_timestamp(self, client):
        r = self.decision(client)
        assert r.status_code == 201
        record = r.json()
        assert record["timestamp"].endswith("+00:00")
        doc_id = record["document_id"]
        got = client.get(f"/decisions?document_id={doc_id}").json()["decisions"]
        assert got == [record]

    def test_insertion_order_preserved(self, client):
        doc_id = any_document_id(client)
        for verdict, code in (("accepted", "C00"), ("rejected", "C01"), ("accepted", "C02")):
            self.decision(client, document_id=doc_id, code=code, verdict=verdict)
        got = client.get(f"/decisions?document_id={doc_id}").json()["decisions"]
        assert [g["code"] for g in got] == ["C00", "C01", "C02"]

    def test_rapid_posts_get_distinct_timestamps(self, client):
        a = self.decision(client).json()
        b = self.decision(client).json()
        assert a["timestamp_ns"] != b["timestamp_ns"]

    def test_survives_restart(self, artifacts, tmp_path):
        root, _, _ = artifacts
        def make_client():
            config = ServiceConfig(checkpoint=str(root / "checkpoint.json"),
                                   corpus=str(root / "corpus.jsonl"),
                                   decisions=str(tmp_path / "durable.jsonl"))
            return TestClient(create_app(load_state(config)))
        first = make_client()
        doc_id = any_document_id(first)
        posted = first.post("/decisions", json={
            "document_id": doc_id, "code": "C03",
            "verdict": "rejected", "reviewer": "r9"}).json()
        second = make_client()  # fresh app and state, same store path
        got = second.get(f"/decisions?document_id={doc_id}").json()["decisions"]
        assert got == [posted]

    def test_invalid_verdict_rejected(self, client):
        assert self.decision(client, verdict="maybe").status_code == 400

    def test_blank_reviewer_rejected(self, client):
        assert self.decision(client, reviewer="  ").status_code == 400

    def test_unknown_document_and_code_rejected(self, client):
        assert self.decision(client, document_id="nope").status_code == 404
        assert self.decision(client, code="NOPE").status_code == 404

    def test_store_is_append_only(self, client):
        doc_id = any_document_id(client)
        seen = []
        for i in range(3):
            self.decision(client, document_id=doc_id, code=f"C0{i}")
            got = client.get(f"/decisions?document_id={doc_id}").json()["decisions"]
            assert [g["code"] for g in got[:len(seen)]] == seen
            seen.append(f"C0{i}")


class TestDecisionStore:
    def test_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "d.jsonl"
        store = DecisionStore(path)
        store.append({"document_id": "a", "code": "C0", "verdict": "accepted"})
        with open(path, "a") as fh:
            fh.write("\n")
        store.append({"document_id": "a", "code": "C1", "verdict": "rejected"})
        assert [r["code"] for r in store.for_document("a")] == ["C0", "C1"]

    def test_missing_file_reads_empty(self, tmp_path):
        assert DecisionStore(tmp_path / "absent.jsonl").all() == []


class TestServiceConfig:
    def test_bounds_checked(self, tmp_path):
        with pytest.raises(ValueError, match="threshold"):
            ServiceConfig(checkpoint="x", threshold=1.0)
        with pytest.raises(ValueError, match="top_k"):
            ServiceConfig(checkpoint="x", top_k=0)
        with pytest.raises(ValueError, match="page_size"):
            ServiceConfig(checkpoint="x", page_size=0)

"""Exit codes and file artifacts of the command line front end."""

import json
import os

import numpy as np
import pytest

from labelattn import cli
from labelattn import text as tx
from labelattn import training as tr


def run(argv):
    return cli.main(argv)


def generate_args(out, seed=7, n_docs=30):
    return ["generate", "--out", str(out), "--m", "4", "--n-docs", str(n_docs),
            "--mean-len", "80", "--label-rate", "1.0", "--seed", str(seed)]


def train_args(corpus, out, **extra):
    argv = ["train", "--corpus", str(corpus), "--out", str(out),
            "--epochs", "3", "--no-cv", "--d-e", "8", "--d-a", "6",
            "--dropout", "0.0", "--lr", "0.01", "--seed", "0"]
    for flag, value in extra.items():
        argv += [f"--{flag.replace('_', '-')}", str(value)]
    return argv


class TestExitCodes:
    def test_usage_errors_exit_1(self, tmp_path):
        assert run([]) == 1
        assert run(["eval"]) == 1
        assert run(["generate", "--out", str(tmp_path / "c.jsonl"), "--bogus"]) == 1

    def test_help_exits_0(self):
        assert run(["--help"]) == 0

    def test_missing_file_exits_2(self, tmp_path):
        assert run(["eval", "--checkpoint", str(tmp_path / "no.json"),
                    "--corpus", str(tmp_path / "no.jsonl")]) == 2

    def test_corrupt_corpus_exits_2(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id": "a"}\n')  # record lacks text/codes
        assert run(["preprocess", "--corpus", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_corrupt_checkpoint_exits_2(self, tmp_path):
        ckpt = tmp_path / "ckpt.json"
        ckpt.write_text('{"format_version": 99}\n')
        corpus = tmp_path / "c.jsonl"
        assert run(generate_args(corpus)) == 0
        assert run(["eval", "--checkpoint", str(ckpt), "--corpus", str(corpus)]) == 2

    def test_runtime_error_exits_3(self, tmp_path, monkeypatch):
        corpus = tmp_path / "c.jsonl"
        assert run(generate_args(corpus)) == 0
        def explode(*args, **kwargs):
            raise tr.TrainingDivergedError("non-finite loss in batch 0")
        monkeypatch.setattr(tr, "train_model", explode)
        assert run(train_args(corpus, tmp_path / "run")) == 3


class TestGenerate:
    def test_same_seed_twice_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert run(generate_args(a, seed=7)) == 0
        assert run(generate_args(b, seed=7)) == 0
        assert a.read_bytes() == b.read_bytes()
        labels_a = tmp_path / "a.labels.jsonl"
        labels_b = tmp_path / "b.labels.jsonl"
        assert labels_a.read_bytes() == labels_b.read_bytes()

    def test_different_seeds_differ(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run(generate_args(a, seed=1))
        run(generate_args(b, seed=2))
        assert a.read_bytes() != b.read_bytes()

    def test_mean_length_tracks_flag(self, tmp_path):
        out = tmp_path / "c.jsonl"
        assert run(["generate", "--out", str(out), "--m", "3", "--n-docs", "200",
                    "--mean-len", "120", "--seed", "0"]) == 0
        lengths = [len(tx.preprocess(r.text)[0]) for r in tx.load_corpus(out)]
        assert abs(np.mean(lengths) - 120) < 120 * 0.1


class TestPreprocess:
    def test_writes_vocab_and_token_ids(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        run(generate_args(corpus))
        out = tmp_path / "pre"
        assert run(["preprocess", "--corpus", str(corpus), "--out", str(out)]) == 0
        vocab = tx.Vocabulary.from_dict(json.loads((out / "vocab.json").read_text()))
        rows = [json.loads(line) for line in (out / "tokens.jsonl").read_text().splitlines()]
        assert len(rows) == 30
        for row in rows:
            ids = row["token_ids"]
            assert ids and all(0 <= i < vocab.size for i in ids)
            assert tx.UNK_ID not in ids  # vocabulary was built from this corpus

    def test_min_count_shrinks_vocabulary(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        run(generate_args(corpus))
        out1, out5 = tmp_path / "p1", tmp_path / "p5"
        run(["preprocess", "--corpus", str(corpus), "--out", str(out1)])
        run(["preprocess", "--corpus", str(corpus), "--out", str(out5), "--min-count", "5"])
        size = lambda p: len(json.loads((p / "vocab.json").read_text())["tokens"])
        assert size(out5) < size(out1)


class TestTrain:
    def test_writes_expected_artifacts(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        run(generate_args(corpus, n_docs=40))
        out = tmp_path / "run"
        argv = ["train", "--corpus", str(corpus), "--out", str(out),
                "--epochs", "2", "--folds", "2", "--d-e", "8", "--d-a", "6",
                "--dropout", "0.0", "--seed", "0"]
        assert run(argv) == 0
        for name in ("checkpoint.json", "history.json", "splits.json", "cv_report.json"):
            assert (out / name).exists(), name
        cv = json.loads((out / "cv_report.json").read_text())
        assert len(cv["folds"]) == 2
        assert set(cv["summary"]) >= {"f1_micro", "f1_macro", "auc_micro"}
        split = tx.load_split(out / "splits.json")
        assert len(split.train) + len(split.validation) + len(split.test) == 40

    def test_no_cv_skips_fold_report(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        run(generate_args(corpus))
        out = tmp_path / "run"
        assert run(train_args(corpus, out)) == 0
        assert not (out / "cv_report.json").exists()
        assert (out / "checkpoint.json").exists()

    def test_zero_lr_leaves_predictions_at_initialization(self, tmp_path):
        # lr 0 must not move parameters, so one epoch and four epochs agree
        corpus = tmp_path / "c.jsonl"
        run(generate_args(corpus))
        short, long = tmp_path / "short", tmp_path / "long"
        assert run(train_args(corpus, short, lr="0.0", epochs="1")) == 0
        assert run(train_args(corpus, long, lr="0.0", epochs="4")) == 0
        params = lambda p: json.loads((p / "checkpoint.json").read_text())["params"]
        assert params(short) == params(long)
        outs = []
        for ckpt in (short, long):
            out_file = ckpt / "pred.json"
            assert run(["predict", "--checkpoint", str(ckpt / "checkpoint.json"),
                        "--text", "pain and fever", "--threshold", "0.4",
                        "--out", str(out_file)]) == 0
            outs.append(out_file.read_bytes())
        assert outs[0] == outs[1]


@pytest.fixture(scope="module")
def eval_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("eval")
    corpus = root / "c.jsonl"
    assert run(generate_args(corpus, n_docs=60)) == 0
    out = root / "run"
    assert run(train_args(corpus, out, epochs="10", batch_size="8")) == 0
    return root, corpus, out


class TestEval:
    def test_report_written_to_stdout_and_file(self, eval_run, tmp_path, capsys):
        root, corpus, out = eval_run
        argv = ["eval", "--checkpoint", str(out / "checkpoint.json"),
                "--corpus", str(corpus), "--splits", str(out / "splits.json"),
                "--split", "test"]
        assert run(argv) == 0
        stdout_report = json.loads(capsys.readouterr().out)
        report_file = tmp_path / "report.json"
        assert run(argv + ["--out", str(report_file)]) == 0
        file_report = json.loads(report_file.read_text())
        assert stdout_report == file_report
        assert file_report["schema_version"] == 1
        assert file_report["n_documents"] == 6

    def test_beats_label_shuffled_corpus_on_train_split(self, eval_run, tmp_path, capsys):
        root, corpus, out = eval_run
        records = tx.load_corpus(corpus)
        shuffled = tmp_path / "shuffled.jsonl"
        codes = [r.codes for r in records]
        rotated = [tx.CorpusRecord(id=r.id, text=r.text, codes=codes[(i + 1) % len(codes)])
                   for i, r in enumerate(records)]
        tx.save_corpus(rotated, shuffled)

        def micro_f1(corpus_path):
            argv = ["eval", "--checkpoint", str(out / "checkpoint.json"),
                    "--corpus", str(corpus_path), "--splits", str(out / "splits.json"),
                    "--split", "train"]
            assert run(argv) == 0
            return json.loads(capsys.readouterr().out)["f1_micro"]

        assert micro_f1(corpus) > micro_f1(shuffled)

    def test_split_flag_needs_split_file(self, eval_run):
        root, corpus, out = eval_run
        assert run(["eval", "--checkpoint", str(out / "checkpoint.json"),
                    "--corpus", str(corpus), "--split", "test"]) == 2


@pytest.fixture(scope="module")
def predict_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("pred")
    corpus = root / "c.jsonl"
    run(generate_args(corpus))
    out = root / "run"
    run(train_args(corpus, out))
    return corpus, out / "checkpoint.json"


class TestPredict:
    def test_text_and_document_id_are_exclusive(self, predict_run):
        corpus, ckpt = predict_run
        assert run(["predict", "--checkpoint", str(ckpt)]) == 1
        assert run(["predict", "--checkpoint", str(ckpt), "--text", "hi",
                    "--document-id", "d00000", "--corpus", str(corpus)]) == 1

    def test_unknown_document_exits_2(self, predict_run):
        corpus, ckpt = predict_run
        assert run(["predict", "--checkpoint", str(ckpt), "--document-id", "zzz",
                    "--corpus", str(corpus)]) == 2

    def test_output_shape(self, predict_run, capsys):
        corpus, ckpt = predict_run
        doc_id = tx.load_corpus(corpus)[0].id
        assert run(["predict", "--checkpoint", str(ckpt), "--document-id", doc_id,
                    "--corpus", str(corpus), "--threshold", "0.01"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["document_id"] == doc_id
        assert isinstance(payload["truncated"], bool)
        probs = [c["probability"] for c in payload["codes"]]
        assert probs == sorted(probs, reverse=True)
        for entry in payload["codes"]:
            assert entry["explanation"]["tokens"]


class TestOptionResolution:
    def test_config_file_supplies_defaults(self, tmp_path, capsys):
        corpus = tmp_path / "c.jsonl"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"m": 6, "n-docs": 12, "mean-len": 80,
                                   "label-rate": 1.0, "seed": 5}))
        assert run(["generate", "--config", str(cfg), "--out", str(corpus)]) == 0
        labels = tx.load_label_set(tmp_path / "c.labels.jsonl")
        assert labels.m == 6
        assert len(tx.load_corpus(corpus)) == 12

    def test_flag_beats_config_file(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n-docs": 12, "mean-len": 80, "label-rate": 1.0}))
        assert run(["generate", "--config", str(cfg), "--out", str(corpus),
                    "--n-docs", "7", "--seed", "0"]) == 0
        assert len(tx.load_corpus(corpus)) == 7

    def test_environment_beats_config_file(self, tmp_path, monkeypatch):
        corpus = tmp_path / "c.jsonl"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n-docs": 12, "mean-len": 80, "label-rate": 1.0}))
        monkeypatch.setenv("LABELATTN_N_DOCS", "9")
        assert run(["generate", "--config", str(cfg), "--out", str(corpus),
                    "--seed", "0"]) == 0
        assert len(tx.load_corpus(corpus)) == 9

    def test_config_file_must_hold_an_object(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("[1, 2]")
        assert run(["generate", "--config", str(cfg),
                    "--out", str(tmp_path / "c.jsonl")]) == 2

"""Command line front end: generate | preprocess | train | eval | predict | serve.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
Diagnostics go to standard error; machine-readable output goes to standard
output or the file named by --out.

Option values resolve in precedence order: explicit flag, then environment
variable LABELATTN_<FLAG> (upper case, dashes as underscores), then the JSON
file named by --config, then the built-in default.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import explain as ex
from . import metrics as mt
from . import text as tx
from . import training as tr
from .encoders import ENCODER_KINDS, INNER_KINDS, EncoderConfig
from .service import ServiceConfig, load_state, predict_payload, serve_blocking

ENV_PREFIX = "LABELATTN_"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


def _eprint(*parts) -> None:
    print(*parts, file=sys.stderr)


def _load_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return payload


class _Options:
    """Flag > environment > config file > default, with a single cast."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file = _load_config_file(getattr(args, "config", None))

    def get(self, name: str, default, cast=None):
        value = getattr(self.args, name.replace("-", "_"), None)
        if value is None:
            env = os.environ.get(ENV_PREFIX + name.replace("-", "_").upper())
            if env is not None:
                value = env
            elif name in self.file:
                value = self.file[name]
        if value is None:
            return default
        return cast(value) if cast is not None else value


def _write_json(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out is None:
        print(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


# generate ------------------------------------------------------------------

def _labels_path_for(corpus_path: str) -> str:
    p = Path(corpus_path)
    return str(p.with_name(p.stem + ".labels" + (p.suffix or ".jsonl")))


def _length_range(mean_len: int) -> tuple:
    # +-24% around the requested mean keeps the uniform draw's mean on target
    lo = max(50, round(mean_len * 0.76))
    hi = min(8000, round(mean_len * 1.24))
    return lo, max(lo, hi)


def cmd_generate(args: argparse.Namespace) -> int:
    opt = _Options(args)
    seed = opt.get("seed", 0, int)
    config = tx.SyntheticConfig(
        m=opt.get("m", 20, int),
        n_docs=opt.get("n-docs", 1000, int),
        doc_len_range=_length_range(opt.get("mean-len", 400, int)),
        evidence_per_label=opt.get("evidence-per-label", 3, int),
        noise_vocab_size=opt.get("noise-vocab", 500, int),
        label_rate=opt.get("label-rate", 4.77, float),
    )
    corpus = tx.generate_synthetic_corpus(config, seed=seed)
    labels_out = opt.get("labels-out", _labels_path_for(args.out))
    tx.save_corpus(corpus.records, args.out)
    tx.save_label_set(corpus.label_set, labels_out)
    _eprint(f"wrote {len(corpus.records)} documents to {args.out}")
    _eprint(f"wrote {corpus.label_set.m} labels to {labels_out}")
    return EXIT_OK


# preprocess ----------------------------------------------------------------

def cmd_preprocess(args: argparse.Namespace) -> int:
    opt = _Options(args)
    records = tx.load_corpus(args.corpus)
    min_count = opt.get("min-count", 1, int)
    token_lists = [tx.preprocess(r.text)[0] for r in records]
    vocab = tx.build_vocabulary(token_lists, min_count=min_count)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "vocab.json", "w", encoding="utf-8") as fh:
        json.dump(vocab.to_dict(), fh)
        fh.write("\n")
    with open(out_dir / "tokens.jsonl", "w", encoding="utf-8") as fh:
        for record, tokens in zip(records, token_lists):
            fh.write(json.dumps({"id": record.id,
                                 "token_ids": vocab.encode(tokens)}) + "\n")
    _eprint(f"vocabulary of {vocab.size} ids and {len(records)} tokenized "
            f"documents written to {out_dir}")
    return EXIT_OK


# train ---------------------------------------------------------------------

def _encoder_config(opt: _Options, vocab_size: int) -> EncoderConfig:
    return EncoderConfig(
        kind=opt.get("encoder", "bag"),
        d_e=opt.get("d-e", 64, int),
        vocab_size=vocab_size,
        max_len=opt.get("max-len", None, int),
        window=opt.get("window", 16, int),
        chunk_len=opt.get("chunk-len", 512, int),
        inner_kind=opt.get("inner", "bag"),
    )


def _ratios(raw: str) -> tuple:
    parts = tuple(float(p) for p in raw.split(","))
    if len(parts) != 3:
        raise ValueError(f"split ratios need three comma-separated numbers, got {raw!r}")
    return parts


def cmd_train(args: argparse.Namespace) -> int:
    opt = _Options(args)
    records = tx.load_corpus(args.corpus)
    labels_path = opt.get("labels", _labels_path_for(args.corpus))
    label_set = tx.load_label_set(labels_path)
    seed = opt.get("seed", 0, int)
    split = tx.split_corpus(records, _ratios(opt.get("split-ratios", "0.8,0.1,0.1")), seed)

    by_id = {r.id: r for r in records}
    train_records = [by_id[i] for i in split.train]
    val_records = [by_id[i] for i in split.validation]
    # vocabulary comes from the training part only; UNK absorbs the rest
    vocab = tx.build_vocabulary((tx.preprocess(r.text)[0] for r in train_records),
                                min_count=opt.get("min-count", 1, int))

    config = tr.TrainConfig(
        lr=opt.get("lr", 1e-3, float),
        batch_size=opt.get("batch-size", 16, int),
        epochs=opt.get("epochs", 25, int),
        folds=opt.get("folds", 5, int),
        dropout=opt.get("dropout", 0.1, float),
        early_stop_patience=opt.get("patience", 5, int),
        seed=seed,
        head=opt.get("head", "dlac"),
        d_a=opt.get("d-a", 48, int),
        encoder=_encoder_config(opt, vocab.size),
    )

    def examples_of(recs):
        return tr.examples_from_documents(tx.build_documents(recs, vocab, label_set))

    train_examples = examples_of(train_records)
    val_examples = examples_of(val_records)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tx.save_split(split, out_dir / "splits.json")

    if not args.no_cv:
        _eprint(f"cross-validating with {config.folds} folds on "
                f"{len(train_examples) + len(val_examples)} documents")
        cv = tr.cross_validate(train_examples + val_examples, label_set, vocab, config)
        _write_json(cv.to_dict(), str(out_dir / "cv_report.json"))
        f1 = cv.summary["f1_micro"]
        if f1["mean"] is not None:
            _eprint(f"cv micro-F1 mean {f1['mean']:.4f} std {f1['std']:.4f}")

    _eprint(f"training {config.head} on {len(train_examples)} documents, "
            f"validating on {len(val_examples)}")
    model = tr.build_model(config, label_set, vocab, np.random.default_rng(seed))
    history = tr.train_model(model, train_examples, val_examples, config,
                             np.random.default_rng(seed + 1))
    tr.save_checkpoint(model, config, vocab, label_set, history,
                       out_dir / "checkpoint.json")
    _write_json({"epochs": history.to_records()}, str(out_dir / "history.json"))
    best = max(history.val_micro_f1s(), default=float("nan"))
    _eprint(f"checkpoint written to {out_dir / 'checkpoint.json'} "
            f"(best val micro-F1 {best:.4f})")
    return EXIT_OK


# eval ----------------------------------------------------------------------

def _documents_for_eval(args, opt, checkpoint) -> list:
    records = tx.load_corpus(args.corpus)
    split_name = opt.get("split", None)
    splits_path = opt.get("splits", None)
    if splits_path is not None:
        assignment = tx.load_split(splits_path).split_of()
        wanted = split_name or "test"
        records = [r for r in records if assignment.get(r.id) == wanted]
        if not records:
            raise ValueError(f"no documents in split {wanted!r}")
    elif split_name is not None:
        raise ValueError("--split needs --splits pointing at a split file")
    return tx.build_documents(records, checkpoint.vocab, checkpoint.label_set)


def cmd_eval(args: argparse.Namespace) -> int:
    opt = _Options(args)
    checkpoint = tr.load_checkpoint(args.checkpoint)
    docs = _documents_for_eval(args, opt, checkpoint)
    examples = tr.examples_from_documents(docs)
    loss, scores = tr.evaluate(checkpoint.model, examples)
    batch = tr.prediction_batch(examples, scores)
    m = checkpoint.label_set.m
    report = mt.compute_report(batch,
                               n=opt.get("p-at-n", min(5, m), int),
                               threshold=opt.get("threshold", 0.5, float),
                               codes=checkpoint.label_set.codes)
    payload = report.to_dict()
    payload["loss"] = loss
    payload["n_documents"] = len(examples)
    _write_json(payload, args.out)
    return EXIT_OK


# predict -------------------------------------------------------------------

def cmd_predict(args: argparse.Namespace) -> int:
    opt = _Options(args)
    if (args.text is None) == (args.document_id is None):
        _eprint("error: provide exactly one of --text or --document-id")
        return EXIT_USAGE
    checkpoint = tr.load_checkpoint(args.checkpoint)
    if args.text is not None:
        tokens, spans = tx.preprocess(args.text)
        document = tx.Document(id="adhoc", raw_text=args.text,
                               tokens=checkpoint.vocab.encode(tokens),
                               token_spans=spans,
                               labels=np.zeros(checkpoint.label_set.m, dtype=np.uint8))
    else:
        if args.corpus is None:
            _eprint("error: --document-id needs --corpus")
            return EXIT_USAGE
        records = tx.load_corpus(args.corpus)
        docs = tx.build_documents(records, checkpoint.vocab, checkpoint.label_set)
        matches = [d for d in docs if d.id == args.document_id]
        if not matches:
            raise ValueError(f"unknown document {args.document_id!r}")
        document = matches[0]
    payload = predict_payload(checkpoint.model, checkpoint.label_set, document,
                              threshold=opt.get("threshold", 0.5, float),
                              top_k=opt.get("top-k", 10, int))
    payload["document_id"] = document.id
    _write_json(payload, args.out)
    return EXIT_OK


# serve ---------------------------------------------------------------------

def cmd_serve(args: argparse.Namespace) -> int:
    opt = _Options(args)
    origins = opt.get("cors-origins", "*")
    if isinstance(origins, str):
        origins = tuple(o.strip() for o in origins.split(",") if o.strip())
    config = ServiceConfig(
        checkpoint=args.checkpoint,
        corpus=opt.get("corpus", None),
        splits=opt.get("splits", None),
        decisions=opt.get("decisions", "decisions.jsonl"),
        host=opt.get("host", "127.0.0.1"),
        port=opt.get("port", 8000, int),
        threshold=opt.get("threshold", 0.5, float),
        top_k=opt.get("top-k", 10, int),
        page_size=opt.get("page-size", 20, int),
        cors_origins=tuple(origins),
    )
    _eprint(f"serving {args.checkpoint} on {config.host}:{config.port}")
    serve_blocking(config)
    return EXIT_OK


# parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelattn",
        description="explainable multi-label text classification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="JSON file with default option values")

    p = sub.add_parser("generate", help="write a synthetic labeled corpus")
    add_config(p)
    p.add_argument("--out", required=True, help="corpus JSONL path")
    p.add_argument("--labels-out", help="label set JSONL path")
    p.add_argument("--m", type=int, help="number of labels")
    p.add_argument("--n-docs", type=int, help="number of documents")
    p.add_argument("--mean-len", type=int, help="target mean document length")
    p.add_argument("--label-rate", type=float, help="mean extra labels per document")
    p.add_argument("--evidence-per-label", type=int)
    p.add_argument("--noise-vocab", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("preprocess", help="tokenize a corpus and build a vocabulary")
    add_config(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--min-count", type=int)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a classifier and write a checkpoint")
    add_config(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels", help="label set JSONL (default: derived from --corpus)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--head", choices=("dlac", "lrc"))
    p.add_argument("--encoder", choices=ENCODER_KINDS)
    p.add_argument("--inner", choices=INNER_KINDS)
    p.add_argument("--d-e", type=int)
    p.add_argument("--d-a", type=int)
    p.add_argument("--max-len", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--chunk-len", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--no-cv", action="store_true",
                   help="skip cross-validation, train the final model only")
    p.add_argument("--min-count", type=int)
    p.add_argument("--split-ratios", help="train,validation,test e.g. 0.8,0.1,0.1")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint against a corpus")
    add_config(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--splits", help="split file written by train")
    p.add_argument("--split", choices=("train", "validation", "test"))
    p.add_argument("--threshold", type=float)
    p.add_argument("--p-at-n", type=int)
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="predict codes with evidence for one document")
    add_config(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text", help="classify this text")
    p.add_argument("--document-id", help="classify this corpus document")
    p.add_argument("--corpus", help="corpus JSONL, needed with --document-id")
    p.add_argument("--threshold", type=float)
    p.add_argument("--top-k", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("serve", help="run the HTTP review service")
    add_config(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus")
    p.add_argument("--splits")
    p.add_argument("--decisions", help="decision store JSONL path")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--top-k", type=int)
    p.add_argument("--page-size", type=int)
    p.add_argument("--cors-origins", help="comma-separated allowed origins")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse exits 2 on usage problems and 0 on --help
        return EXIT_OK if err.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (OSError, ValueError) as err:
        _eprint(f"error: {err}")
        return EXIT_DATA
    except RuntimeError as err:
        _eprint(f"error: {err}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

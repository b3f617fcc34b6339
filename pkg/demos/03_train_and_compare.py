"""Train the label attention head and the mean-pool baseline side by side.

On short documents both heads do well. The gap opens on long documents
with sparse evidence, where mean-pooling washes the signal out; see the
acceptance suite's directional check for that setting.
"""

import numpy as np

from labelattn import encoders as enc
from labelattn import metrics as mt
from labelattn import text as tx
from labelattn import training as tr

corpus = tx.generate_synthetic_corpus(
    tx.SyntheticConfig(m=8, n_docs=400, doc_len_range=(60, 120), label_rate=2.0),
    seed=21)
split = tx.split_corpus(corpus.records, (0.8, 0.1, 0.1), seed=21)
vocab = tx.build_vocabulary(tx.preprocess(r.text)[0] for r in corpus.records)
docs = {d.id: d for d in tx.build_documents(corpus.records, vocab, corpus.label_set)}
parts = {name: tr.examples_from_documents([docs[i] for i in ids])
         for name, ids in (("train", split.train),
                           ("validation", split.validation),
                           ("test", split.test))}
print(f"{len(parts['train'])} train / {len(parts['validation'])} validation / "
      f"{len(parts['test'])} test documents, vocabulary {vocab.size}")

reports = {}
for head in ("dlac", "lrc"):
    config = tr.TrainConfig(lr=1e-2, batch_size=16, epochs=10, folds=2,
                            dropout=0.1, early_stop_patience=4, seed=21,
                            head=head, d_a=16,
                            encoder=enc.EncoderConfig(kind="bag", d_e=24,
                                                      vocab_size=vocab.size))
    model = tr.build_model(config, corpus.label_set, vocab, np.random.default_rng(21))
    history = tr.train_model(model, parts["train"], parts["validation"], config,
                             np.random.default_rng(22))
    _, scores = tr.evaluate(model, parts["test"])
    report = mt.compute_report(tr.prediction_batch(parts["test"], scores))
    reports[head] = report
    print(f"\n{head}: stopped after {len(history)} epochs, "
          f"best validation micro-F1 {max(history.val_micro_f1s()):.4f}")

print(f"\n{'metric':<16}{'label attention':>18}{'mean-pool baseline':>20}")
for metric in ("auc_micro", "auc_macro", "f1_micro", "f1_macro", "precision_at_n"):
    a = getattr(reports["dlac"], metric)
    b = getattr(reports["lrc"], metric)
    print(f"{metric:<16}{a:>18.4f}{b:>20.4f}")

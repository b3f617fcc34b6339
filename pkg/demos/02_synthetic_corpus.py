"""The planted-evidence corpus generator.

Every label owns a keyword set; a document carries a label exactly when
one of that label's keywords was planted into it. Labels are therefore
objectively decidable, which later lets us score explanations against
ground truth.
"""

import numpy as np

from labelattn import text as tx

config = tx.SyntheticConfig(m=6, n_docs=200, doc_len_range=(80, 160),
                            label_rate=2.0)
corpus = tx.generate_synthetic_corpus(config, seed=7)

lengths = [len(tx.preprocess(r.text)[0]) for r in corpus.records]
cardinalities = [len(r.codes) for r in corpus.records]
print(f"{len(corpus.records)} documents, {corpus.label_set.m} labels")
print(f"mean length {np.mean(lengths):.1f} tokens, "
      f"mean labels per document {np.mean(cardinalities):.2f}")

print("\nlabel descriptions embed the keywords that cause the label:")
for code, desc in zip(corpus.label_set.codes, corpus.label_set.descriptions):
    print(f"  {code}: {desc}")

record = corpus.records[0]
planted = corpus.evidence_metadata()["planted"][record.id]
print(f"\ndocument {record.id} carries {record.codes}")
print(f"planted keyword positions by label: {planted}")

tokens, _ = tx.preprocess(record.text)
for code, positions in planted.items():
    shown = ", ".join(f"{tokens[p]}@{p}" for p in positions)
    print(f"  {code}: {shown}")

print("\nfirst 30 tokens:")
print(" ", " ".join(tokens[:30]))

"""Unit tests for preprocessing, vocabulary, corpus I/O and the synthetic generator."""

import json
import string

import numpy as np
import pytest

from labelattn import text as tx


class TestPreprocess:
    def test_punctuation_and_digit_rules(self):
        tokens, _ = tx.preprocess("Chest X-Ray, 2 views.")
        assert tokens == ["chest", "x", "ray", "views"]

    def test_lowercasing(self):
        tokens, _ = tx.preprocess("ABC abc")
        assert tokens == ["abc", "abc"]

    def test_mixed_alphanumeric_kept(self):
        tokens, _ = tx.preprocess("a1c 450 mg")
        assert tokens == ["a1c", "mg"]

    def test_empty_result_rejected(self):
        for text in ("...", "123 456", "  \n"):
            with pytest.raises(tx.EmptyDocumentError):
                tx.preprocess(text)

    def test_spans_reference_original_text(self):
        raw = "Chest X-Ray, 2 views."
        tokens, spans = tx.preprocess(raw)
        for tok, (s, e) in zip(tokens, spans):
            assert raw[s:e].lower() == tok

    def test_idempotent_on_own_output(self):
        rng = np.random.default_rng(7)
        alphabet = string.ascii_letters + string.digits + " .,;-()/"
        for _ in range(50):
            raw = "".join(rng.choice(list(alphabet), size=60))
            try:
                tokens, _ = tx.preprocess(raw)
            except tx.EmptyDocumentError:
                continue
            again, _ = tx.preprocess(" ".join(tokens))
            assert again == tokens

    def test_output_tokens_clean(self):
        rng = np.random.default_rng(8)
        alphabet = string.printable
        for _ in range(50):
            raw = "".join(rng.choice(list(alphabet), size=80))
            try:
                tokens, spans = tx.preprocess(raw)
            except tx.EmptyDocumentError:
                continue
            assert spans == sorted(spans)
            for tok in tokens:
                assert tok == tok.lower()
                assert not tok.isdigit()


class TestVocabulary:
    def test_min_count_one_keeps_all(self):
        vocab = tx.build_vocabulary([["a", "a", "b"]], min_count=1)
        assert vocab.size == 4  # PAD, UNK, a, b
        assert vocab.id_for("a") == 2
        assert vocab.id_for("b") == 3

    def test_min_count_two_maps_rare_to_unk(self):
        vocab = tx.build_vocabulary([["a", "a", "b"]], min_count=2)
        assert vocab.id_for("b") == tx.UNK_ID
        assert vocab.id_for("a") == 2

    def test_deterministic_assignment(self):
        corpus = [["pain", "chest", "pain"], ["chest", "acute"]]
        v1 = tx.build_vocabulary(corpus)
        v2 = tx.build_vocabulary(corpus)
        assert v1.id_to_token == v2.id_to_token

    def test_frequency_then_lexicographic_order(self):
        vocab = tx.build_vocabulary([["b", "b", "c", "a"]])
        assert vocab.id_to_token[2:] == ["b", "a", "c"]

    def test_specials_fixed(self):
        vocab = tx.build_vocabulary([["x"]])
        assert vocab.id_to_token[tx.PAD_ID] == tx.PAD_TOKEN
        assert vocab.id_to_token[tx.UNK_ID] == tx.UNK_TOKEN

    def test_round_trip_dict(self):
        vocab = tx.build_vocabulary([["a", "b", "a"]])
        again = tx.Vocabulary.from_dict(vocab.to_dict())
        assert again.id_to_token == vocab.id_to_token


class TestLabelSet:
    def test_duplicate_codes_rejected(self):
        with pytest.raises(ValueError):
            tx.LabelSet([("a", "x"), ("a", "y")])

    def test_empty_description_rejected(self):
        with pytest.raises(ValueError):
            tx.LabelSet([("a", "")])

    def test_vector(self):
        ls = tx.LabelSet([("a", "da"), ("b", "db"), ("c", "dc")])
        np.testing.assert_array_equal(ls.vector(["c", "a"]), [1, 0, 1])


class TestCorpusIO:
    def test_round_trip(self, tmp_path):
        records = [
            tx.CorpusRecord(id="d1", text="chest pain", codes=["401.9"]),
            tx.CorpusRecord(id="d2", text="acute asthma attack", codes=["493.90", "401.9"]),
            tx.CorpusRecord(id="d3", text="well visit", codes=[]),
        ]
        path = tmp_path / "corpus.jsonl"
        tx.save_corpus(records, path)
        loaded = tx.load_corpus(path)
        assert loaded == records

    def test_missing_codes_field_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "text": "x", "codes": []}\n{"id": "b", "text": "y"}\n')
        with pytest.raises(tx.CorpusFormatError) as err:
            tx.load_corpus(path)
        assert err.value.line == 2
        assert "codes" in str(err.value)

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "text": "x", "codes": []}\nnot json\n')
        with pytest.raises(tx.CorpusFormatError) as err:
            tx.load_corpus(path)
        assert err.value.line == 2

    def test_empty_file_gives_empty_corpus(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert tx.load_corpus(path) == []

    def test_label_set_round_trip(self, tmp_path):
        ls = tx.LabelSet([("401.9", "hypertension"), ("493.90", "asthma")])
        path = tmp_path / "labels.jsonl"
        tx.save_label_set(ls, path)
        again = tx.load_label_set(path)
        assert again.codes == ls.codes and again.descriptions == ls.descriptions

    def test_documents_rebuilt_identically(self, tmp_path):
        corpus = tx.generate_synthetic_corpus(tx.SyntheticConfig(m=4, n_docs=6, doc_len_range=(50, 80)), seed=3)
        vocab = tx.build_vocabulary(tx.preprocess(r.text)[0] for r in corpus.records)
        docs = tx.build_documents(corpus.records, vocab, corpus.label_set)
        path = tmp_path / "c.jsonl"
        tx.save_corpus(corpus.records, path)
        docs2 = tx.build_documents(tx.load_corpus(path), vocab, corpus.label_set)
        for a, b in zip(docs, docs2):
            assert a.id == b.id and a.raw_text == b.raw_text
            assert a.tokens == b.tokens and a.token_spans == b.token_spans
            np.testing.assert_array_equal(a.labels, b.labels)


class TestSplitCorpus:
    def _records(self, n):
        return [tx.CorpusRecord(id=f"d{i}", text="t", codes=[]) for i in range(n)]

    def test_basic_sizes(self):
        split = tx.split_corpus(self._records(100), (0.8, 0.1, 0.1), seed=0)
        assert (len(split.train), len(split.validation), len(split.test)) == (80, 10, 10)

    def test_all_train(self):
        split = tx.split_corpus(self._records(10), (1.0, 0.0, 0.0), seed=0)
        assert len(split.train) == 10 and not split.validation and not split.test

    def test_benchmark_sample_counts(self):
        n = 11368
        ratios = (8066 / n, 1573 / n, 1729 / n)
        split = tx.split_corpus(self._records(n), ratios, seed=1)
        assert abs(len(split.train) - 8066) <= 1
        assert abs(len(split.validation) - 1573) <= 1
        assert abs(len(split.test) - 1729) <= 1

    def test_partition_invariants(self):
        records = self._records(53)
        split = tx.split_corpus(records, (0.6, 0.2, 0.2), seed=5)
        all_ids = split.train + split.validation + split.test
        assert sorted(all_ids) == sorted(r.id for r in records)
        assert len(set(all_ids)) == len(all_ids)

    def test_deterministic(self):
        records = self._records(40)
        s1 = tx.split_corpus(records, (0.5, 0.25, 0.25), seed=9)
        s2 = tx.split_corpus(records, (0.5, 0.25, 0.25), seed=9)
        assert s1 == s2

    def test_positive_ratio_with_no_docs_rejected(self):
        with pytest.raises(tx.SplitError):
            tx.split_corpus(self._records(3), (0.9, 0.05, 0.05), seed=0)

    def test_bad_ratio_sum_rejected(self):
        with pytest.raises(ValueError):
            tx.split_corpus(self._records(10), (0.5, 0.2, 0.2), seed=0)


class TestSyntheticCorpus:
    def test_labels_match_planted_keywords_exhaustively(self):
        config = tx.SyntheticConfig(m=5, n_docs=40, doc_len_range=(60, 120))
        corpus = tx.generate_synthetic_corpus(config, seed=11)
        keyword_sets = {c: set(kws) for c, kws in corpus.evidence_keywords.items()}
        for rec in corpus.records:
            tokens = set(rec.text.split())
            for code in corpus.label_set.codes:
                present = bool(tokens & keyword_sets[code])
                assert present == (code in rec.codes)

    def test_planted_positions_point_at_keywords(self):
        corpus = tx.generate_synthetic_corpus(tx.SyntheticConfig(m=4, n_docs=10, doc_len_range=(50, 90)), seed=2)
        for rec, planted in zip(corpus.records, corpus.planted_positions):
            tokens = rec.text.split()
            for code, positions in planted.items():
                assert positions
                for pos in positions:
                    assert tokens[pos] in corpus.evidence_keywords[code]

    def test_descriptions_contain_keywords(self):
        corpus = tx.generate_synthetic_corpus(tx.SyntheticConfig(m=3, n_docs=2, doc_len_range=(50, 60)), seed=0)
        for code in corpus.label_set.codes:
            desc = corpus.label_set.descriptions[corpus.label_set.index(code)]
            for kw in corpus.evidence_keywords[code]:
                assert kw in desc.split()

    def test_byte_identical_for_same_seed(self):
        config = tx.SyntheticConfig(m=4, n_docs=15, doc_len_range=(50, 100))
        a = tx.generate_synthetic_corpus(config, seed=7)
        b = tx.generate_synthetic_corpus(config, seed=7)
        assert json.dumps([r.__dict__ for r in a.records]) == json.dumps([r.__dict__ for r in b.records])

    def test_different_seed_differs(self):
        config = tx.SyntheticConfig(m=4, n_docs=15, doc_len_range=(50, 100))
        a = tx.generate_synthetic_corpus(config, seed=7)
        b = tx.generate_synthetic_corpus(config, seed=8)
        assert any(x.text != y.text for x, y in zip(a.records, b.records))

    def test_benchmark_shaped_statistics(self):
        # mean length ~1612 tokens and ~5.77 codes per document
        config = tx.SyntheticConfig(m=50, n_docs=2000, doc_len_range=(1232, 1992),
                                    label_rate=4.77, noise_vocab_size=800)
        corpus = tx.generate_synthetic_corpus(config, seed=42)
        lengths = [len(r.text.split()) for r in corpus.records]
        code_counts = [len(r.codes) for r in corpus.records]
        assert abs(np.mean(lengths) - 1612) / 1612 < 0.05
        assert abs(np.mean(code_counts) - 5.77) / 5.77 < 0.05
        assert min(code_counts) >= 1

    def test_evidence_overlap_rejected(self):
        config = tx.SyntheticConfig(m=900, evidence_per_label=3)
        with pytest.raises(tx.SyntheticConfigError, match="overlap"):
            tx.generate_synthetic_corpus(config, seed=0)

    def test_doc_len_range_validated(self):
        with pytest.raises(tx.SyntheticConfigError):
            tx.generate_synthetic_corpus(tx.SyntheticConfig(doc_len_range=(10, 100)), seed=0)
        with pytest.raises(tx.SyntheticConfigError):
            tx.generate_synthetic_corpus(tx.SyntheticConfig(doc_len_range=(100, 9000)), seed=0)

    def test_generated_text_survives_preprocessing_unchanged(self):
        corpus = tx.generate_synthetic_corpus(tx.SyntheticConfig(m=3, n_docs=5, doc_len_range=(50, 70)), seed=1)
        for rec in corpus.records:
            tokens, _ = tx.preprocess(rec.text)
            assert tokens == rec.text.split()

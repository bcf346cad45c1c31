import numpy as np
import pytest

from alertgrouping.core import MISSING, AlertSequence
from alertgrouping.errors import EmptyTrainingData
from alertgrouping.vocab import (
    build_vocab,
    embed_sequence,
    initial_embedding,
    load_vocab,
    save_vocab,
    tokenize,
    vocab_hash,
)

from conftest import make_alert, make_seq


def seq_with_counts(counts0, counts1=None):
    """Build a sequence where feature_0 value v appears counts0[v] times."""
    counts1 = counts1 or {"w": 1}
    alerts, t = [], 0.0
    vals1 = list(counts1)
    i = 0
    for v, c in counts0.items():
        for _ in range(c):
            alerts.append(make_alert(t, v, vals1[i % len(vals1)], idx=len(alerts)))
            t += 1.0
            i += 1
    return AlertSequence(alerts)


class TestBuildVocab:
    def test_threshold_excludes_rare(self):
        seq = seq_with_counts({"a": 12, "b": 9})
        vocab = build_vocab(seq, min_count=10)
        fv = vocab.features[0]
        assert "a" in fv.ids and "b" not in fv.ids
        assert fv.counts["b"] == 9

    def test_min_count_one_keeps_all(self):
        seq = seq_with_counts({"a": 1, "b": 2, "c": 1})
        vocab = build_vocab(seq, min_count=1)
        assert set(vocab.features[0].ids) == {"a", "b", "c"}

    def test_threshold_inclusive_boundary(self):
        # count < min_count resolves to unknown; exactly min_count is kept
        for count, kept in [(9, False), (10, True), (11, True)]:
            seq = seq_with_counts({"x": count})
            fv = build_vocab(seq, min_count=10).features[0]
            assert ("x" in fv.ids) == kept

    def test_empty_training_data(self):
        with pytest.raises(EmptyTrainingData):
            build_vocab(AlertSequence([]), min_count=1)

    def test_deterministic_lexicographic_ids(self):
        seq = seq_with_counts({"zeta": 2, "alpha": 2, "mid": 2})
        v1 = build_vocab(seq, min_count=1)
        v2 = build_vocab(seq, min_count=1)
        assert v1.features[0].ids == v2.features[0].ids
        assert list(v1.features[0].ids) == ["alpha", "mid", "zeta"]

    def test_threshold_monotonicity(self, rng):
        values = {f"v{i}": int(rng.integers(1, 20)) for i in range(15)}
        seq = seq_with_counts(values)
        sizes = [
            len(build_vocab(seq, min_count=m).features[0].ids) for m in range(1, 21)
        ]
        assert sizes == sorted(sizes, reverse=True)

    def test_missing_sentinel_never_in_table(self):
        seq = seq_with_counts({MISSING: 50, "a": 50})
        fv = build_vocab(seq, min_count=1).features[0]
        assert MISSING not in fv.ids


class TestTokenize:
    def setup_method(self):
        self.vocab = build_vocab(seq_with_counts({"a": 3, "b": 3}, {"web": 6}), min_count=1)

    def test_known_values(self):
        tok = tokenize(make_alert(0, "a", "web"), self.vocab)
        assert tok == (self.vocab.features[0].ids["a"], self.vocab.features[1].ids["web"])

    def test_unseen_value_is_unknown(self):
        tok = tokenize(make_alert(0, "zzz", "web"), self.vocab)
        assert tok[0] == self.vocab.features[0].unknown_id

    def test_missing_sentinel_is_unknown(self):
        tok = tokenize(make_alert(0, MISSING, MISSING), self.vocab)
        assert tok == (self.vocab.features[0].unknown_id, self.vocab.features[1].unknown_id)

    def test_unknown_and_mask_distinct(self):
        fv = self.vocab.features[0]
        assert fv.unknown_id != fv.mask_id
        assert fv.unknown_id not in fv.ids.values()


class TestInitialEmbedding:
    def test_sum_definition(self):
        tables = [np.array([[1.0, 0.0]]), np.array([[0.0, 2.0]])]
        assert initial_embedding((0, 0), tables).tolist() == [1.0, 2.0]

    def test_matches_bruteforce_sum(self, rng):
        tables = [rng.normal(size=(7, 5)), rng.normal(size=(4, 5))]
        for _ in range(20):
            toks = (int(rng.integers(0, 7)), int(rng.integers(0, 4)))
            expected = tables[0][toks[0]] + tables[1][toks[1]]
            assert np.allclose(initial_embedding(toks, tables), expected)

    def test_masked_alert_sums_mask_rows(self):
        vocab = build_vocab(seq_with_counts({"a": 2}, {"w": 2}), min_count=1)
        sizes = vocab.sizes()
        tables = [np.arange(sizes[0] * 2).reshape(sizes[0], 2).astype(float),
                  np.arange(sizes[1] * 2).reshape(sizes[1], 2).astype(float)]
        toks = (vocab.features[0].mask_id, vocab.features[1].mask_id)
        expected = tables[0][toks[0]] + tables[1][toks[1]]
        assert np.allclose(initial_embedding(toks, tables), expected)


class TestEmbedSequence:
    def test_empty(self, rng):
        vocab = build_vocab(seq_with_counts({"a": 2}), min_count=1)
        tables = [rng.normal(size=(f.size, 3)) for f in vocab.features]
        assert embed_sequence(AlertSequence([]), vocab, tables).shape == (0, 3)

    def test_matches_per_alert_loop(self, rng):
        seq = seq_with_counts({f"v{i}": 10 for i in range(10)}, {"x": 50, "y": 50})
        vocab = build_vocab(seq, min_count=1)
        tables = [rng.normal(size=(f.size, 4)) for f in vocab.features]
        out = embed_sequence(seq, vocab, tables)
        for i, alert in enumerate(seq):
            expected = initial_embedding(tokenize(alert, vocab), tables)
            assert np.array_equal(out[i], expected)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        vocab = build_vocab(seq_with_counts({"a": 12, "b": 9, "c": 15}), min_count=10)
        path = tmp_path / "vocab.json"
        save_vocab(vocab, path)
        back = load_vocab(path)
        assert back == vocab
        assert vocab_hash(back) == vocab_hash(vocab)

    def test_hash_differs_for_different_vocab(self):
        v1 = build_vocab(seq_with_counts({"a": 5}), min_count=1)
        v2 = build_vocab(seq_with_counts({"b": 5}), min_count=1)
        assert vocab_hash(v1) != vocab_hash(v2)

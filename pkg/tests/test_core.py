import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alertgrouping.core import (
    AlertSequence,
    HierLabel,
    canonicalize_groups,
    merge_sorted,
    validate_sequence,
)
from alertgrouping.errors import (
    DuplicateSourceIndex,
    NonFiniteTimestamp,
    UnsortedTimestamps,
)

from conftest import make_alert, make_seq


class TestValidateSequence:
    def test_empty_sequence_ok(self):
        validate_sequence(AlertSequence([]))

    def test_ties_allowed(self):
        seq = make_seq([1.0, 2.0, 2.0])
        validate_sequence(seq)

    def test_unsorted_rejected(self):
        seq = AlertSequence([make_alert(2.0, idx=0), make_alert(1.0, idx=1)])
        with pytest.raises(UnsortedTimestamps):
            validate_sequence(seq)

    def test_duplicate_source_index(self):
        seq = AlertSequence([make_alert(1.0, idx=3), make_alert(2.0, idx=3)])
        with pytest.raises(DuplicateSourceIndex):
            validate_sequence(seq)

    def test_non_finite_timestamp(self):
        seq = AlertSequence([make_alert(float("nan"))])
        with pytest.raises(NonFiniteTimestamp):
            validate_sequence(seq)

    def test_tie_order_by_source_index(self):
        seq = AlertSequence([make_alert(1.0, idx=5), make_alert(1.0, idx=2)])
        with pytest.raises(UnsortedTimestamps):
            validate_sequence(seq)


class TestHierLabel:
    def test_noise_constructor(self):
        lbl = HierLabel.noise()
        assert lbl.is_noise and lbl.event == "noise"

    def test_attack_requires_all_levels(self):
        with pytest.raises(ValueError):
            HierLabel("scan", "", "1")

    def test_noise_event_reserved(self):
        with pytest.raises(ValueError):
            HierLabel("noise", "s", "i")


class TestCanonicalize:
    def test_simple(self):
        labels = np.array([7, 7, 3, 3, 7])
        out = canonicalize_groups(labels)
        assert out.tolist() == [0, 0, 2, 2, 0]

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(min_value=-5, max_value=5), max_size=60))
    def test_idempotent(self, raw):
        once = canonicalize_groups(np.array(raw, dtype=np.int64))
        twice = canonicalize_groups(once)
        assert np.array_equal(once, twice)

    def test_empty(self):
        assert canonicalize_groups(np.array([], dtype=np.int64)).size == 0


class TestMergeSorted:
    def test_merge_valid(self, rng):
        a = make_seq(np.sort(rng.uniform(0, 50, 20)))
        b = make_seq(np.sort(rng.uniform(0, 50, 30)))
        merged = merge_sorted(a, b)
        validate_sequence(merged)
        assert len(merged) == 50

    def test_merge_stable_on_ties(self):
        a = make_seq([1.0, 2.0], features=[("a1", "x"), ("a2", "x")])
        b = make_seq([1.0, 2.0], features=[("b1", "x"), ("b2", "x")])
        merged = merge_sorted(a, b)
        assert [al.attributes["feature_0"] for al in merged] == ["a1", "b1", "a2", "b2"]
        validate_sequence(merged)

import numpy as np
import pytest

from alertgrouping.core import FEATURE_KEYS, Alert, AlertSequence, HierLabel


def make_alert(t, f0="a", f1="x", label=None, idx=0):
    return Alert(
        timestamp=float(t),
        attributes={FEATURE_KEYS[0]: f0, FEATURE_KEYS[1]: f1},
        label=label,
        source_index=idx,
    )


def make_seq(timestamps, features=None, labels=None):
    alerts = []
    for i, t in enumerate(timestamps):
        f0, f1 = features[i] if features is not None else ("a", "x")
        label = labels[i] if labels is not None else None
        alerts.append(make_alert(t, f0, f1, label, i))
    return AlertSequence(alerts)


def random_representation(rng, n, d=2, span=100.0):
    """Sorted timestamps plus unit-ish random embeddings."""
    t = np.sort(rng.uniform(0.0, span, size=n))
    e = rng.normal(size=(n, d))
    return t, e


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

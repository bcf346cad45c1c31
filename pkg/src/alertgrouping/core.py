"""Domain types shared by every stage of the pipeline.

An :class:`Alert` is a timestamp plus two extracted string features and an
optional three-level ground-truth label.  All types are treated as immutable
after construction and are safe to share across threads.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

import numpy as np

from .errors import DuplicateSourceIndex, NonFiniteTimestamp, UnsortedTimestamps

#: Reserved event value marking false-positive (noise) alerts.
NOISE_EVENT = "noise"

#: Attribute keys holding the two extracted features of an alert.
FEATURE_KEYS = ("feature_0", "feature_1")

#: Reserved sentinel for a feature value absent from the source record.
MISSING = "__missing__"

SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class HierLabel:
    """Three-level group identity: event, attack stage, attack instance.

    Noise alerts carry the reserved event value :data:`NOISE_EVENT` and empty
    lower levels; attack alerts must fill all three levels.
    """

    event: str
    stage: str = ""
    instance: str = ""
    is_noise: bool = False

    def __post_init__(self):
        if self.is_noise:
            if self.event != NOISE_EVENT:
                raise ValueError(f"noise labels must use event {NOISE_EVENT!r}")
        else:
            if not (self.event and self.stage and self.instance):
                raise ValueError("attack labels require all three non-empty levels")
            if self.event == NOISE_EVENT:
                raise ValueError(f"event {NOISE_EVENT!r} is reserved for noise")

    @classmethod
    def noise(cls) -> "HierLabel":
        return cls(NOISE_EVENT, "", "", True)

    @property
    def leaf(self) -> tuple[str, str, str]:
        return (self.event, self.stage, self.instance)


@dataclass(frozen=True)
class Alert:
    """One IDS alert: epoch timestamp, feature map, optional label.

    ``source_index`` is the alert's position within its sequence and is the
    tie-breaker among equal timestamps.
    """

    timestamp: float
    attributes: dict[str, str]
    label: Optional[HierLabel] = None
    source_index: int = 0

    def feature(self, k: int) -> str:
        return self.attributes[FEATURE_KEYS[k]]

    def with_(self, **changes) -> "Alert":
        return replace(self, **changes)


@dataclass
class AlertSequence:
    """Alerts ordered by timestamp, ties broken by source_index."""

    alerts: list[Alert] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.alerts)

    def __iter__(self) -> Iterator[Alert]:
        return iter(self.alerts)

    def __getitem__(self, i):
        return self.alerts[i]

    def timestamps(self) -> np.ndarray:
        return np.array([a.timestamp for a in self.alerts], dtype=np.float64)

    def labels(self) -> list[Optional[HierLabel]]:
        return [a.label for a in self.alerts]


def validate_sequence(seq: AlertSequence) -> None:
    """Check all AlertSequence invariants, raising on the first violation.

    Raises:
        NonFiniteTimestamp: a timestamp is NaN or infinite.
        UnsortedTimestamps: timestamps decrease, or equal timestamps are not
            ordered by source_index.
        DuplicateSourceIndex: two alerts share a source_index.
    """
    seen: set[int] = set()
    prev: Optional[Alert] = None
    for pos, alert in enumerate(seq):
        if not math.isfinite(alert.timestamp):
            raise NonFiniteTimestamp(f"alert at position {pos}")
        if alert.source_index in seen:
            raise DuplicateSourceIndex(f"source_index {alert.source_index} repeated")
        seen.add(alert.source_index)
        if prev is not None:
            if alert.timestamp < prev.timestamp:
                raise UnsortedTimestamps(f"timestamp decreases at position {pos}")
            if alert.timestamp == prev.timestamp and alert.source_index < prev.source_index:
                raise UnsortedTimestamps(f"tie order violated at position {pos}")
        prev = alert


def reindex(alerts: list[Alert]) -> AlertSequence:
    """Assign source_index 0..n-1 in list order."""
    return AlertSequence([a.with_(source_index=i) for i, a in enumerate(alerts)])


def merge_sorted(a: AlertSequence, b: AlertSequence) -> AlertSequence:
    """Merge two valid sequences into one valid sequence.

    The merge is stable on equal timestamps (alerts of ``a`` first) and
    source indices are reassigned, so the result always validates.
    """
    merged = heapq.merge(a, b, key=lambda alert: alert.timestamp)
    return reindex(list(merged))


def canonicalize_groups(labels) -> np.ndarray:
    """Map arbitrary group ids to the smallest member index of each group.

    Idempotent: canonical labels map to themselves.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    if n == 0:
        return labels.copy()
    _, inverse = np.unique(labels, return_inverse=True)
    first = np.full(inverse.max() + 1, n, dtype=np.int64)
    np.minimum.at(first, inverse, np.arange(n, dtype=np.int64))
    return first[inverse]

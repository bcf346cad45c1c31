"""Grouping phase: time-cosine metric, edge enumeration, components.

Two alerts join the same group when their time-cosine distance is strictly
below the threshold delta.  The distance is the maximum of the absolute time
difference and theta times the cosine distance of the embeddings, so a pair
further than delta apart in time can never connect; edge enumeration only
scans a sliding time window of width delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _sparse_cc

from .core import canonicalize_groups
from .errors import (
    IndexOutOfRange,
    NonMonotoneTimestamp,
    UnsortedInput,
    ZeroNormEmbedding,
)


class AlertRepresentation(NamedTuple):
    """The (timestamp, embedding) pair an alert is reduced to for grouping."""

    t: float
    e: np.ndarray


@dataclass(frozen=True)
class GroupingParams:
    """Distance threshold delta (seconds) and embedding tuning factor theta."""

    delta: float
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValueError("delta must be a positive finite number")
        if not (math.isfinite(self.theta) and self.theta >= 0):
            raise ValueError("theta must be a non-negative finite number")


def _unit_rows(embeddings: np.ndarray) -> np.ndarray:
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2:
        raise ZeroNormEmbedding("embeddings must be a 2-d matrix")
    norms = np.sqrt(np.einsum("ij,ij->i", e, e))
    if np.any(norms == 0.0):
        raise ZeroNormEmbedding(
            f"{int((norms == 0.0).sum())} embedding rows have zero norm"
        )
    return e / norms[:, None]


def time_cosine_distance(a1: AlertRepresentation, a2: AlertRepresentation,
                         theta: float) -> float:
    """max(|t1 - t2|, theta * (1 - cos(e1, e2))); exactly 0 on identical reps."""
    e1 = np.asarray(a1.e, dtype=np.float64)
    e2 = np.asarray(a2.e, dtype=np.float64)
    n1 = math.sqrt(float(e1 @ e1))
    n2 = math.sqrt(float(e2 @ e2))
    if n1 == 0.0 or n2 == 0.0:
        raise ZeroNormEmbedding("cosine distance undefined for zero-norm embedding")
    dt = abs(a1.t - a2.t)
    if theta == 0.0 or np.array_equal(e1, e2):
        return dt
    sim = min(1.0, max(-1.0, float((e1 / n1) @ (e2 / n2))))
    return max(dt, theta * (1.0 - sim))


def neighbourhood_cone_angle(delta: float, theta: float) -> float:
    """Opening angle (radians) of the embedding-space cone of a neighbourhood.

    2 * arccos(1 - delta / theta); once delta / theta exceeds 2 the
    neighbourhood covers every direction and the full angle 2*pi is returned
    (likewise for theta = 0, where the cosine term never binds).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if theta == 0.0 or delta / theta > 2.0:
        return 2.0 * math.pi
    return 2.0 * math.acos(1.0 - delta / theta)


def _check_sorted(timestamps: np.ndarray) -> np.ndarray:
    t = np.asarray(timestamps, dtype=np.float64)
    if t.ndim != 1:
        raise UnsortedInput("timestamps must be a 1-d array")
    if t.size and (not np.all(np.isfinite(t)) or np.any(np.diff(t) < 0)):
        raise UnsortedInput("timestamps must be finite and non-decreasing")
    return t


def enumerate_edges(timestamps, embeddings, params: GroupingParams) -> np.ndarray:
    """All index pairs (i, j), i > j, with time-cosine distance < delta.

    Only candidates within the delta time window are examined; pairs further
    apart in time already have distance >= delta.  Returns an (m, 2) int
    array.
    """
    t = _check_sorted(timestamps)
    n = t.size
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    u = _unit_rows(embeddings)
    if u.shape[0] != n:
        raise IndexOutOfRange("timestamps and embeddings disagree on length")
    lo = np.searchsorted(t, t - params.delta, side="right")
    out_i, out_j = [], []
    for i in range(1, n):
        start = int(lo[i])
        if start >= i:
            continue
        dt = t[i] - t[start:i]
        if params.theta == 0.0:
            dist = dt
        else:
            sim = np.clip(u[start:i] @ u[i], -1.0, 1.0)
            dist = np.maximum(dt, params.theta * (1.0 - sim))
        hits = np.flatnonzero(dist < params.delta)
        if hits.size:
            out_j.append(hits + start)
            out_i.append(np.full(hits.size, i, dtype=np.int64))
    if not out_i:
        return np.empty((0, 2), dtype=np.int64)
    return np.column_stack([np.concatenate(out_i), np.concatenate(out_j)])


def connected_components(n: int, edges: np.ndarray) -> np.ndarray:
    """Group labels from an edge list; ids are the smallest member index."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n < 0:
        raise IndexOutOfRange("n must be non-negative")
    if edges.size:
        if edges.min() < 0 or edges.max() >= n:
            raise IndexOutOfRange("edge endpoint outside [0, n)")
    if n == 0:
        return np.empty(0, dtype=np.int64)
    if edges.size == 0:
        return np.arange(n, dtype=np.int64)
    graph = coo_matrix(
        (np.ones(edges.shape[0], dtype=np.int8), (edges[:, 0], edges[:, 1])),
        shape=(n, n),
    )
    _, labels = _sparse_cc(graph, directed=False)
    return canonicalize_groups(labels)


def group_alerts(timestamps, embeddings, params: GroupingParams) -> np.ndarray:
    """Edge enumeration followed by connected components.

    When 2 * theta < delta the cosine term can never reach the threshold and
    the metric degenerates to pure time difference; in that regime the edge
    set is replaced by the (connectivity-equivalent) consecutive-gap edges,
    which keeps large parameter sweeps tractable.
    """
    t = _check_sorted(timestamps)
    u_check = _unit_rows(embeddings)
    if u_check.shape[0] != t.size:
        raise IndexOutOfRange("timestamps and embeddings disagree on length")
    if 2.0 * params.theta < params.delta:
        ii = np.flatnonzero(np.diff(t) < params.delta) + 1
        edges = np.column_stack([ii, ii - 1])
    else:
        edges = enumerate_edges(t, embeddings, params)
    return connected_components(t.size, edges)


def time_delta_group(timestamps, delta: float) -> np.ndarray:
    """Baseline: a new group starts whenever the gap to the previous alert is >= delta."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    t = _check_sorted(timestamps)
    n = t.size
    if n == 0:
        return np.empty(0, dtype=np.int64)
    is_start = np.concatenate([[True], np.diff(t) >= delta])
    starts = np.flatnonzero(is_start)
    return starts[np.cumsum(is_start) - 1]


class UnionFind:
    """Disjoint sets over integer indices with union by rank.

    Tracks the smallest member of every set, so canonical group ids come out
    in O(alpha) per query.
    """

    def __init__(self, size: int = 0):
        self.parent = list(range(size))
        self.rank = [0] * size
        self.min_member = list(range(size))

    def add(self) -> int:
        idx = len(self.parent)
        self.parent.append(idx)
        self.rank.append(0)
        self.min_member.append(idx)
        return idx

    def find(self, u: int) -> int:
        parent = self.parent
        root = u
        while parent[root] != root:
            root = parent[root]
        while parent[u] != root:  # path compression
            parent[u], u = root, parent[u]
        return root

    def union(self, u: int, v: int) -> int:
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            return ru
        if self.rank[ru] < self.rank[rv]:
            ru, rv = rv, ru
        self.parent[rv] = ru
        if self.rank[ru] == self.rank[rv]:
            self.rank[ru] += 1
        self.min_member[ru] = min(self.min_member[ru], self.min_member[rv])
        return ru

    def canonical(self, u: int) -> int:
        return self.min_member[self.find(u)]

    def labels(self) -> np.ndarray:
        n = len(self.parent)
        return np.fromiter(
            (self.canonical(i) for i in range(n)), dtype=np.int64, count=n
        )


class OnlineGrouper:
    """Incremental grouping of a monotone alert stream.

    Memory for representations is bounded by the delta window: embeddings of
    alerts older than the window are released, since the metric guarantees
    they can never gain a new direct edge.  Group membership itself is kept
    for the full history (an integer per alert), so the assignment always
    equals the batch result of :func:`group_alerts`.
    """

    def __init__(self, params: GroupingParams):
        self.params = params
        self._uf = UnionFind()
        self._t: list[float] = []
        self._window_t: list[float] = []
        self._window_u: list[np.ndarray] = []
        self._window_idx: list[int] = []

    def __len__(self) -> int:
        return len(self._t)

    def add(self, t: float, e: np.ndarray) -> int:
        """Insert the next alert; returns its canonical group id so far."""
        if self._t and t < self._t[-1]:
            raise NonMonotoneTimestamp(f"timestamp {t} precedes {self._t[-1]}")
        e = np.asarray(e, dtype=np.float64)
        norm = math.sqrt(float(e @ e))
        if norm == 0.0:
            raise ZeroNormEmbedding("cosine distance undefined for zero-norm embedding")
        u_new = e / norm

        delta, theta = self.params.delta, self.params.theta
        drop = 0
        while drop < len(self._window_t) and self._window_t[drop] <= t - delta:
            drop += 1
        if drop:
            del self._window_t[:drop]
            del self._window_u[:drop]
            del self._window_idx[:drop]

        idx = self._uf.add()
        self._t.append(t)
        if self._window_t:
            tw = np.array(self._window_t)
            dt = t - tw
            if theta == 0.0:
                dist = dt
            else:
                uw = np.vstack(self._window_u)
                sim = np.clip(uw @ u_new, -1.0, 1.0)
                dist = np.maximum(dt, theta * (1.0 - sim))
            for w in np.flatnonzero(dist < delta):
                self._uf.union(idx, self._window_idx[int(w)])
        self._window_t.append(t)
        self._window_u.append(u_new)
        self._window_idx.append(idx)
        return self.group_of(idx)

    def group_of(self, idx: int) -> int:
        return self._uf.canonical(idx)

    def labels(self) -> np.ndarray:
        return self._uf.labels()

"""Input validation helpers for the estimator layer."""

from __future__ import annotations

import numpy as np

from .errors import UnsortedInput


def check_matrix(X, name: str = "X", min_cols: int = 1) -> np.ndarray:
    """Coerce to a finite float64 2-d array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got ndim={X.ndim}")
    if X.shape[1] < min_cols:
        raise ValueError(f"{name} needs at least {min_cols} columns, got {X.shape[1]}")
    if X.size and not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def check_sorted_timestamps(t, name: str = "timestamps") -> np.ndarray:
    t = np.asarray(t, dtype=np.float64).ravel()
    if t.size and np.any(np.diff(t) < 0):
        raise UnsortedInput(f"{name} must be non-decreasing")
    return t


def split_representation(X) -> tuple[np.ndarray, np.ndarray]:
    """Split an (n, 1 + d) representation matrix into timestamps and embeddings."""
    X = check_matrix(X, "X", min_cols=2)
    t = check_sorted_timestamps(X[:, 0], "X[:, 0]")
    return t, X[:, 1:]

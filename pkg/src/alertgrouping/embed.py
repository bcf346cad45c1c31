"""Per-alert output embeddings via overlapping context windows, plus PCA.

Long sequences are covered by windows that advance by the readout length;
each alert's embedding is read from the window in whose central readout
region it falls, so every position is buffered by ``pad`` alerts of context
on both sides (except at the sequence boundaries, where the edge windows
extend their readout).
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import AlertSequence
from .errors import DimensionMismatch, RankDeficientWarning, ZeroNormPerturbedWarning
from .model import ModelState, forward
from .vocab import Vocabulary, embed_token_ids, token_id_matrix


@dataclass(frozen=True)
class ReadoutConfig:
    context: int = 4096
    readout: int = 2048
    pad: int = 1024

    def __post_init__(self):
        if self.pad + self.readout + self.pad != self.context:
            raise ValueError("pad + readout + pad must equal context")


def window_plan(n: int, cfg: ReadoutConfig) -> list[tuple[int, int, int, int]]:
    """Covering of ``n`` positions as (win_start, win_end, read_start, read_end).

    Readout regions tile [0, n) disjointly.  Window w nominally spans
    [w*readout - pad, w*readout - pad + context), clipped to the sequence;
    its readout region is [w*readout, (w+1)*readout), with the last window's
    readout extended to the sequence end.
    """
    if n <= 0:
        return []
    if n <= cfg.context:
        return [(0, n, 0, n)]
    plan = []
    num_windows = -(-n // cfg.readout)
    for w in range(num_windows):
        read_start = w * cfg.readout
        read_end = min(read_start + cfg.readout, n)
        if w == num_windows - 1:
            read_end = n
        win_start = max(0, read_start - cfg.pad)
        win_end = min(read_start - cfg.pad + cfg.context, n)
        plan.append((win_start, win_end, read_start, read_end))
    return plan


def windowed_embed(
    seq: AlertSequence,
    vocab: Vocabulary,
    state: ModelState,
    cfg: ReadoutConfig | None = None,
) -> np.ndarray:
    """Output embedding of every alert, read from its covering window.

    No masking is applied at inference.  Returns an (n, d) float64 matrix.
    """
    if cfg is None:
        cfg = ReadoutConfig(
            context=state.config.context_size,
            readout=state.config.context_size // 2,
            pad=state.config.context_size // 4,
        )
    if cfg.context > state.config.context_size:
        raise DimensionMismatch("readout context exceeds model context size")
    n = len(seq)
    d = state.config.d
    if n == 0:
        return np.zeros((0, d))
    ids = token_id_matrix(seq, vocab)
    ts = seq.timestamps()
    out = np.empty((n, d))
    for win_start, win_end, read_start, read_end in window_plan(n, cfg):
        x0 = embed_token_ids(ids[win_start:win_end], state.tables)
        outputs, _, _ = forward(x0, ts[win_start:win_end], state)
        out[read_start:read_end] = outputs[read_start - win_start:read_end - win_start]
    return out


# --- PCA ---------------------------------------------------------------------

@dataclass
class PcaModel:
    """Mean vector and orthonormal principal directions (rows)."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    fitted_on: str = ""

    @property
    def k(self) -> int:
        return self.components.shape[0]


def fit_pca(embeddings: np.ndarray, k: int = 2, fitted_on: str = "") -> PcaModel:
    """Top-k principal directions by eigendecomposition of the covariance.

    Deterministic sign convention: within each component the entry of
    largest magnitude is made positive.  Rank deficiency (fewer than k
    nonzero eigenvalues) is reported as a warning, not an error; the
    returned directions stay orthonormal regardless.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch("embeddings must be a 2-d matrix")
    n, d = x.shape
    if n <= k:
        raise ValueError(f"need more than {k} rows to fit {k} components, got {n}")
    if k < 1 or k > d:
        raise ValueError(f"k must be in [1, {d}]")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    comps = eigvecs[:, order[:k]].T.copy()
    tol = max(eigvals[0], 0.0) * 1e-12
    if np.count_nonzero(eigvals > tol) < k:
        warnings.warn(
            f"only {np.count_nonzero(eigvals > tol)} nonzero eigenvalues for k={k}",
            RankDeficientWarning,
        )
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(
        mean=mean,
        components=comps,
        explained_variance=np.maximum(eigvals[:k], 0.0),
        fitted_on=fitted_on,
    )


def transform_pca(model: PcaModel, embeddings: np.ndarray) -> np.ndarray:
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.mean.shape[0]:
        raise DimensionMismatch(
            f"expected (n, {model.mean.shape[0]}) input, got {x.shape}"
        )
    return (x - model.mean) @ model.components.T


def guard_zero_rows(embeddings: np.ndarray, eps: float = 1e-12) -> tuple[np.ndarray, int]:
    """Perturb all-zero rows so cosine distances stay defined.

    Returns the (possibly copied) matrix and the number of rows perturbed;
    a warning carries the count.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    zero = ~np.any(x != 0.0, axis=1)
    count = int(zero.sum())
    if count:
        x = x.copy()
        x[zero, 0] = eps
        warnings.warn(f"perturbed {count} zero-norm embedding rows", ZeroNormPerturbedWarning)
    return x, count


def save_pca(model: PcaModel, path) -> None:
    doc = {
        "mean": model.mean.tolist(),
        "components": model.components.tolist(),
        "explained_variance": model.explained_variance.tolist(),
        "fitted_on": model.fitted_on,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_pca(path) -> PcaModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return PcaModel(
        mean=np.array(doc["mean"], dtype=np.float64),
        components=np.array(doc["components"], dtype=np.float64),
        explained_variance=np.array(doc["explained_variance"], dtype=np.float64),
        fitted_on=doc.get("fitted_on", ""),
    )


# --- embedding store -----------------------------------------------------------

_EMB_MAGIC = b"AGRPEMB1"


def save_embeddings(embeddings: np.ndarray, path, source_path=None, pca_tag: str = "") -> None:
    """Binary store: header + row-major float32, with a JSON sidecar."""
    x = np.asarray(embeddings)
    if x.ndim != 2:
        raise DimensionMismatch("embeddings must be a 2-d matrix")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_EMB_MAGIC)
        fh.write(int(x.shape[0]).to_bytes(8, "little"))
        fh.write(int(x.shape[1]).to_bytes(8, "little"))
        fh.write(np.ascontiguousarray(x, dtype=np.float32).tobytes())
    sidecar = {
        "n": int(x.shape[0]),
        "k": int(x.shape[1]),
        "dtype": "float32",
        "pca": pca_tag,
        "source_sha256": _file_sha256(source_path) if source_path else "",
    }
    with open(path.with_suffix(path.suffix + ".json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_embeddings(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(8) != _EMB_MAGIC:
            raise DimensionMismatch("not an embedding store")
        n = int.from_bytes(fh.read(8), "little")
        k = int.from_bytes(fh.read(8), "little")
        raw = fh.read(n * k * 4)
    if len(raw) != n * k * 4:
        raise DimensionMismatch("truncated embedding store")
    return np.frombuffer(raw, dtype=np.float32).reshape(n, k).astype(np.float64)


def export_embeddings_csv(embeddings: np.ndarray, path) -> None:
    x = np.asarray(embeddings)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(f"dim_{j}" for j in range(x.shape[1])) + "\n")
        for row in x:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()

"""Pairwise grouping quality: per-label TPR/TNR, grid sweeps, ROC envelopes.

Quality is scored over unordered alert pairs.  For a target leaf label,
positive pairs are those whose members both carry the label; negative pairs
have exactly one member carrying it (noise alerts leave the pool entirely in
exclude-noise mode).  Sweeping the (delta, theta) grid yields a point cloud
per label whose minimal monotone step-function envelope generalizes the
single-parameter ROC curve; its staircase integral is the AUC.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import HierLabel
from .errors import LengthMismatch, MissingLeafPoint, UnknownLabel, UnlabelledAlert
from .group import GroupingParams, group_alerts, time_delta_group

NOISE_MODES = ("include", "exclude")


@dataclass(frozen=True)
class PairConfusion:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def tpr(self) -> float:
        return 1.0 if self.tp + self.fn == 0 else self.tp / (self.tp + self.fn)

    @property
    def tnr(self) -> float:
        return 1.0 if self.tn + self.fp == 0 else self.tn / (self.tn + self.fp)


@dataclass(frozen=True)
class RocPoint:
    delta: float
    theta: float
    tnr: float
    tpr: float


@dataclass
class RocEnvelope:
    """Minimal monotone step function over (fpr, tpr) points, plus its area."""

    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def _leaf_of(label) -> tuple[str, str, str]:
    if isinstance(label, HierLabel):
        return label.leaf
    return tuple(label)


def _require_labels(true_labels: Sequence[HierLabel]):
    for i, lbl in enumerate(true_labels):
        if lbl is None:
            raise UnlabelledAlert(i)


def pair_confusion(
    true_labels: Sequence[HierLabel],
    predicted,
    target,
    noise_mode: str = "include",
) -> PairConfusion:
    """Pair counts for one target leaf label against a predicted grouping."""
    if noise_mode not in NOISE_MODES:
        raise ValueError(f"noise_mode must be one of {NOISE_MODES}")
    predicted = np.asarray(predicted)
    if len(true_labels) != predicted.shape[0]:
        raise LengthMismatch(
            f"{len(true_labels)} labels vs {predicted.shape[0]} predictions"
        )
    _require_labels(true_labels)
    leaf = _leaf_of(target)
    target_mask = np.fromiter(
        (lbl.leaf == leaf for lbl in true_labels), dtype=bool, count=len(true_labels)
    )
    pool = np.ones(len(true_labels), dtype=bool)
    if noise_mode == "exclude":
        noise = np.fromiter(
            (lbl.is_noise for lbl in true_labels), dtype=bool, count=len(true_labels)
        )
        pool = ~noise
    if not (target_mask & pool).any():
        raise UnknownLabel(f"label {leaf!r} absent from the evaluation pool")

    _, inv = np.unique(predicted, return_inverse=True)
    n_groups = int(inv.max()) + 1
    in_target = np.bincount(inv[target_mask], minlength=n_groups).astype(np.int64)
    in_others = np.bincount(
        inv[pool & ~target_mask], minlength=n_groups
    ).astype(np.int64)

    n_t = int(target_mask.sum())
    n_o = int((pool & ~target_mask).sum())
    tp = int((in_target * (in_target - 1) // 2).sum())
    fn = n_t * (n_t - 1) // 2 - tp
    fp = int((in_target * in_others).sum())
    tn = n_t * n_o - fp
    return PairConfusion(tp=tp, fn=fn, fp=fp, tn=tn)


def default_parameter_grid() -> np.ndarray:
    """The 42 sweep values a * 2^i for i in -7..13 and a in {1, 1.5}."""
    values = [a * 2.0 ** i for i in range(-7, 14) for a in (1.0, 1.5)]
    return np.array(sorted(values))


def leaf_labels(true_labels: Sequence[HierLabel]) -> list[tuple[str, str, str]]:
    """Distinct non-noise leaf labels in order of first appearance."""
    _require_labels(true_labels)
    seen: list[tuple[str, str, str]] = []
    have = set()
    for lbl in true_labels:
        if not lbl.is_noise and lbl.leaf not in have:
            have.add(lbl.leaf)
            seen.append(lbl.leaf)
    return seen


def _score_assignment(assignment, true_labels, leaves, noise_mode):
    return {
        leaf: pair_confusion(true_labels, assignment, leaf, noise_mode)
        for leaf in leaves
    }


def sweep_grid(
    timestamps,
    embeddings,
    true_labels: Sequence[HierLabel],
    deltas: Optional[np.ndarray] = None,
    thetas: Optional[np.ndarray] = None,
    noise_mode: str = "include",
    threads: int = 1,
    progress=None,
) -> dict[tuple[str, str, str], list[RocPoint]]:
    """Group once per (delta, theta) combination and score every leaf label.

    Results are keyed by leaf label and ordered by (delta, theta) regardless
    of execution order.
    """
    deltas = default_parameter_grid() if deltas is None else np.asarray(deltas, dtype=float)
    thetas = default_parameter_grid() if thetas is None else np.asarray(thetas, dtype=float)
    leaves = leaf_labels(true_labels)
    combos = sorted(product(deltas.tolist(), thetas.tolist()))

    def run(combo):
        delta, theta = combo
        assignment = group_alerts(timestamps, embeddings, GroupingParams(delta, theta))
        scores = _score_assignment(assignment, true_labels, leaves, noise_mode)
        if progress is not None:
            progress(delta, theta)
        return combo, scores

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(run, combos))
    else:
        results = dict(run(c) for c in combos)

    out: dict[tuple[str, str, str], list[RocPoint]] = {leaf: [] for leaf in leaves}
    for delta, theta in combos:
        scores = results[(delta, theta)]
        for leaf in leaves:
            pc = scores[leaf]
            out[leaf].append(RocPoint(delta=delta, theta=theta, tnr=pc.tnr, tpr=pc.tpr))
    return out


def sweep_time_delta(
    timestamps,
    true_labels: Sequence[HierLabel],
    deltas: Optional[np.ndarray] = None,
    noise_mode: str = "include",
) -> dict[tuple[str, str, str], list[RocPoint]]:
    """Single-parameter sweep of the time-delta baseline (theta = 0)."""
    deltas = default_parameter_grid() if deltas is None else np.asarray(deltas, dtype=float)
    leaves = leaf_labels(true_labels)
    out: dict[tuple[str, str, str], list[RocPoint]] = {leaf: [] for leaf in leaves}
    for delta in sorted(deltas.tolist()):
        assignment = time_delta_group(timestamps, delta)
        for leaf, pc in _score_assignment(assignment, true_labels, leaves, noise_mode).items():
            out[leaf].append(RocPoint(delta=delta, theta=0.0, tnr=pc.tnr, tpr=pc.tpr))
    return out


def roc_envelope(points) -> RocEnvelope:
    """Envelope f(x) = max{tpr : fpr <= x} with anchors (0,0) and (1,1).

    ``points`` may hold RocPoint instances or raw (tnr, tpr) pairs.  The AUC
    is the exact staircase integral of f over [0, 1].
    """
    pts = []
    for p in points:
        tnr, tpr = (p.tnr, p.tpr) if isinstance(p, RocPoint) else (p[0], p[1])
        if not (0.0 <= tnr <= 1.0 and 0.0 <= tpr <= 1.0):
            raise ValueError("rates must lie in [0, 1]")
        pts.append((1.0 - tnr, tpr))
    pts.append((0.0, 0.0))
    pts.append((1.0, 1.0))
    pts.sort()
    xs, ys = [], []
    best = 0.0
    for x, y in pts:
        best = max(best, y)
        if xs and xs[-1] == x:
            ys[-1] = best
        else:
            xs.append(x)
            ys.append(best)
    auc = 0.0
    for i in range(len(xs) - 1):
        auc += (xs[i + 1] - xs[i]) * ys[i]
    return RocEnvelope(fpr=np.array(xs), tpr=np.array(ys), auc=auc)


def macro_aggregate(
    points_by_label: dict, labels: Optional[Sequence] = None
) -> list[RocPoint]:
    """Unweighted per-parameter average of the contained labels' rates."""
    keys = list(points_by_label) if labels is None else list(labels)
    if not keys:
        return []
    grids: list[dict[tuple[float, float], RocPoint]] = []
    for key in keys:
        if key not in points_by_label:
            raise MissingLeafPoint(f"no points for label {key!r}")
        grids.append({(p.delta, p.theta): p for p in points_by_label[key]})
    combos = sorted(grids[0])
    for key, grid in zip(keys, grids):
        if sorted(grid) != combos:
            raise MissingLeafPoint(f"label {key!r} misses grid points")
    out = []
    for delta, theta in combos:
        tprs = [g[(delta, theta)].tpr for g in grids]
        tnrs = [g[(delta, theta)].tnr for g in grids]
        out.append(
            RocPoint(
                delta=delta,
                theta=theta,
                tnr=float(np.mean(tnrs)),
                tpr=float(np.mean(tprs)),
            )
        )
    return out


@dataclass
class RocReport:
    """Per-leaf point clouds plus event-level and overall macro curves."""

    noise_mode: str
    leaf_points: dict[tuple[str, str, str], list[RocPoint]]
    event_points: dict[str, list[RocPoint]]
    macro_points: list[RocPoint]
    auc: dict[str, float]

    @property
    def macro_auc(self) -> float:
        return self.auc.get("macro", 0.0)


def build_report(
    points_by_leaf: dict[tuple[str, str, str], list[RocPoint]], noise_mode: str
) -> RocReport:
    events: dict[str, list] = {}
    for leaf in points_by_leaf:
        events.setdefault(leaf[0], []).append(leaf)
    event_points = {
        event: macro_aggregate(points_by_leaf, leaves)
        for event, leaves in sorted(events.items())
    }
    macro_points = macro_aggregate(points_by_leaf) if points_by_leaf else []
    auc: dict[str, float] = {}
    for leaf, pts in points_by_leaf.items():
        auc["/".join(leaf)] = roc_envelope(pts).auc
    for event, pts in event_points.items():
        auc[event] = roc_envelope(pts).auc
    if macro_points:
        auc["macro"] = roc_envelope(macro_points).auc
    return RocReport(
        noise_mode=noise_mode,
        leaf_points=points_by_leaf,
        event_points=event_points,
        macro_points=macro_points,
        auc=auc,
    )


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _write_points_csv(path, points: list[RocPoint]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("delta,theta,tnr,tpr\n")
        for p in points:
            fh.write(f"{p.delta!r},{p.theta!r},{p.tnr!r},{p.tpr!r}\n")


def read_points_csv(path) -> list[RocPoint]:
    points = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip() != "delta,theta,tnr,tpr":
            raise ValueError(f"unexpected header in {path}")
        for line in fh:
            d, t, tnr, tpr = (float(v) for v in line.strip().split(","))
            points.append(RocPoint(delta=d, theta=t, tnr=tnr, tpr=tpr))
    return points


def emit_report(report: RocReport, out_dir) -> list[Path]:
    """Write per-label points and envelope CSVs plus a JSON AUC summary.

    Output is deterministic: same report, byte-identical files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    named: list[tuple[str, list[RocPoint]]] = [
        ("/".join(leaf), pts) for leaf, pts in sorted(report.leaf_points.items())
    ]
    named += [(event, pts) for event, pts in sorted(report.event_points.items())]
    if report.macro_points:
        named.append(("macro", report.macro_points))
    for name, pts in named:
        slug = _slug(name)
        points_path = out_dir / f"points_{slug}.csv"
        _write_points_csv(points_path, pts)
        env = roc_envelope(pts)
        env_path = out_dir / f"envelope_{slug}.csv"
        with open(env_path, "w", encoding="utf-8") as fh:
            fh.write("fpr,tpr\n")
            for x, y in zip(env.fpr, env.tpr):
                fh.write(f"{float(x)!r},{float(y)!r}\n")
        written += [points_path, env_path]
    summary = {
        "schema_version": 1,
        "noise_mode": report.noise_mode,
        "num_leaf_labels": len(report.leaf_points),
        "auc": {k: report.auc[k] for k in sorted(report.auc)},
    }
    summary_path = out_dir / "summary.json"
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(summary_path)
    return written

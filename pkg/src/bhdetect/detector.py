"""Density-based silent-failure detection.

Feature matrices are standardized with training-set statistics, clustered
with DBSCAN, and rows that land in no dense region (label -1) are the
black-hole candidates. Hyperparameters are tuned by coordinate descent
over an (eps, min_pts) grid scored with the Davies-Bouldin index, ties
broken by Silhouette.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .bhmm import PROVENANCE_TEMPORAL, FeatureMatrix
from .telemetry import FlagTable


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_pts: int
    metric: str = "euclidean"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")
        if self.metric != "euclidean":
            raise ValueError("only the euclidean metric is supported")


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    core_flags: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.core_flags = np.asarray(self.core_flags, dtype=bool)
        if self.labels.shape != self.core_flags.shape:
            raise ValueError("labels and core_flags length mismatch")
        non_noise = self.labels[self.labels >= 0]
        k = self.n_clusters
        if non_noise.size and (non_noise.max() >= k):
            raise ValueError("cluster labels are not contiguous")
        if np.any(self.core_flags & (self.labels < 0)):
            raise ValueError("a core point cannot be noise")

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if np.any(self.labels >= 0) else 0

    @property
    def noise_fraction(self) -> float:
        if self.labels.size == 0:
            return 0.0
        return float(np.count_nonzero(self.labels < 0)) / self.labels.size


def _as_array(m) -> np.ndarray:
    values = getattr(m, "values", m)
    return np.ascontiguousarray(values, dtype=np.float64)


def dbscan(points, params: DbscanParams, impl: str | None = None) -> ClusterAssignment:
    """Classic DBSCAN over standardized features.

    Inclusive eps boundary, the point counts as its own neighbor, border
    points join the earliest cluster that reaches them in row order.
    """
    X = _as_array(points)
    if X.shape[0] < 1:
        raise ValueError("need at least one row")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains NaN or inf")
    labels, core = _kernels.dbscan_labels(X, params.eps, params.min_pts, impl=impl)
    return ClusterAssignment(labels=labels, core_flags=core)


@dataclass
class Standardizer:
    """Per-column z-scaling fitted on training rows (population std)."""

    column_names: list[str] | None
    mean: np.ndarray
    std: np.ndarray

    def apply(self, m):
        X = _as_array(m)
        if X.shape[1] != self.mean.size:
            raise ValueError("column count does not match the fitted standardizer")
        values = (X - self.mean) / self.std
        if isinstance(m, FeatureMatrix):
            return dataclasses.replace(m, values=values)
        return values


def fit_standardizer(train) -> Standardizer:
    X = _as_array(train)
    if X.shape[0] == 0:
        raise ValueError("empty training matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    names = getattr(train, "column_names", None)
    for i, s in enumerate(std):
        if s == 0.0:
            col = names[i] if names else f"#{i}"
            raise ValueError(f"zero standard deviation in column {col!r}")
    return Standardizer(column_names=list(names) if names else None,
                        mean=mean, std=std)


def _cluster_distance_sums(X: np.ndarray, labels: np.ndarray, k: int):
    """For each point, the summed distance to every cluster's members."""
    n = X.shape[0]
    sums = np.zeros((n, k), dtype=np.float64)
    counts = np.bincount(labels[labels >= 0], minlength=k)
    block = max(32, min(4096, (1 << 24) // max(n, 1)))
    members = [np.flatnonzero(labels == c) for c in range(k)]
    sq = np.einsum("ij,ij->i", X, X)
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        d2 = sq[i0:i1, None] + sq[None, :] - 2.0 * (X[i0:i1] @ X.T)
        np.maximum(d2, 0.0, out=d2)
        d = np.sqrt(d2)
        for c in range(k):
            sums[i0:i1, c] = d[:, members[c]].sum(axis=1)
    return sums, counts


def silhouette_score(points, labels) -> float:
    """Mean silhouette over non-noise points.

    s(i) = (b - a) / max(a, b) with a the mean distance to the point's own
    cluster and b the mean distance to the nearest other cluster; points
    in singleton clusters score 0.
    """
    X = _as_array(points)
    labels = np.asarray(labels, dtype=np.int64)
    scored = labels >= 0
    uniq = np.unique(labels[scored])
    if uniq.size < 2:
        raise ValueError("silhouette undefined: need at least 2 clusters")
    Xs = X[scored]
    ls = labels[scored]
    # Re-index cluster ids compactly.
    remap = {c: i for i, c in enumerate(uniq)}
    ls = np.array([remap[c] for c in ls], dtype=np.int64)
    k = uniq.size

    sums, counts = _cluster_distance_sums(Xs, ls, k)
    n = Xs.shape[0]
    s = np.zeros(n, dtype=np.float64)
    for i in range(n):
        c = ls[i]
        if counts[c] <= 1:
            continue  # singleton: s = 0
        a = sums[i, c] / (counts[c] - 1)
        b = min(
            sums[i, o] / counts[o] for o in range(k) if o != c and counts[o] > 0
        )
        denom = max(a, b)
        s[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(s.mean())


def davies_bouldin_score(points, labels) -> float:
    """Mean worst-case cluster similarity; 0 is best.

    Per cluster pair: (mean member-to-centroid distance of each, summed)
    over the centroid distance; each cluster contributes its worst ratio.
    """
    X = _as_array(points)
    labels = np.asarray(labels, dtype=np.int64)
    scored = labels >= 0
    uniq = np.unique(labels[scored])
    if uniq.size < 2:
        raise ValueError("davies-bouldin undefined: need at least 2 clusters")
    centroids = np.stack([X[labels == c].mean(axis=0) for c in uniq])
    sigma = np.array([
        np.linalg.norm(X[labels == c] - centroids[i], axis=1).mean()
        for i, c in enumerate(uniq)
    ])
    k = uniq.size
    dist = np.linalg.norm(centroids[:, None, :] - centroids[None, :, :], axis=2)
    worst = np.zeros(k)
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            if dist[i, j] == 0.0:
                raise ValueError("coincident cluster centroids")
            worst[i] = max(worst[i], (sigma[i] + sigma[j]) / dist[i, j])
    return float(worst.mean())


@dataclass
class TuningCell:
    eps: float
    min_pts: int
    valid: bool
    silhouette: float | None = None
    davies_bouldin: float | None = None
    n_clusters: int = 0
    noise_fraction: float = 0.0
    reason: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "eps": self.eps,
            "min_pts": self.min_pts,
            "valid": self.valid,
            "silhouette": self.silhouette,
            "davies_bouldin": self.davies_bouldin,
            "n_clusters": self.n_clusters,
            "noise_fraction": self.noise_fraction,
            "reason": self.reason,
        }


@dataclass
class TuningReport:
    cells: list[TuningCell]
    selected: DbscanParams
    rounds_run: int

    def to_json_dict(self) -> dict:
        return {
            "selected": {"eps": self.selected.eps, "min_pts": self.selected.min_pts},
            "rounds_run": self.rounds_run,
            "cells": [c.to_json_dict() for c in self.cells],
        }


def tune_hyperparameters(
    train,
    val,
    eps_grid: list[float],
    min_pts_grid: list[int],
    rounds: int = 3,
    max_noise_fraction: float = 0.25,
) -> TuningReport:
    """Coordinate-descent sweep of (eps, min_pts).

    The standardizer is fitted on the training rows; validity indices are
    computed on the standardized validation rows. Each sweep fixes one
    hyperparameter and picks the other by lowest Davies-Bouldin, ties
    broken by highest Silhouette, then by the smaller value. Cells where
    a score is undefined are recorded as invalid and skipped, as are
    degenerate cells that push more than max_noise_fraction of the
    validation rows into noise (indices computed on a vanishing subset
    are not comparable).
    """
    if not eps_grid or not min_pts_grid:
        raise ValueError("empty hyperparameter grid")
    scaler = fit_standardizer(train)
    V = _as_array(scaler.apply(val))

    cache: dict[tuple[float, int], TuningCell] = {}
    order: list[TuningCell] = []

    def evaluate(eps: float, min_pts: int) -> TuningCell:
        key = (eps, min_pts)
        if key in cache:
            return cache[key]
        assign = dbscan(V, DbscanParams(eps=eps, min_pts=min_pts))
        cell = TuningCell(
            eps=eps,
            min_pts=min_pts,
            valid=False,
            n_clusters=assign.n_clusters,
            noise_fraction=assign.noise_fraction,
        )
        if cell.noise_fraction > max_noise_fraction:
            cell.reason = (
                f"degenerate: noise fraction {cell.noise_fraction:.3f} "
                f"above {max_noise_fraction}"
            )
            cache[key] = cell
            order.append(cell)
            return cell
        try:
            cell.silhouette = silhouette_score(V, assign.labels)
            cell.davies_bouldin = davies_bouldin_score(V, assign.labels)
            cell.valid = True
        except ValueError as exc:
            cell.reason = str(exc)
        cache[key] = cell
        order.append(cell)
        return cell

    def best_of(cells: list[TuningCell]) -> TuningCell | None:
        valid = [c for c in cells if c.valid]
        if not valid:
            return None
        return min(
            valid,
            key=lambda c: (c.davies_bouldin, -c.silhouette, c.eps, c.min_pts),
        )

    cur_eps, cur_mp = eps_grid[0], min_pts_grid[0]
    rounds_run = 0
    for _ in range(rounds):
        prev = (cur_eps, cur_mp)
        pick = best_of([evaluate(e, cur_mp) for e in eps_grid])
        if pick is not None:
            cur_eps = pick.eps
        pick = best_of([evaluate(cur_eps, mp) for mp in min_pts_grid])
        if pick is not None:
            cur_mp = pick.min_pts
        rounds_run += 1
        if (cur_eps, cur_mp) == prev:
            break

    if not cache[(cur_eps, cur_mp)].valid:
        # The descent never found a valid cell along its path; scan the
        # whole grid once before giving up.
        pick = best_of([evaluate(e, mp) for e in eps_grid for mp in min_pts_grid])
        if pick is None:
            raise ValueError("no valid cell in the hyperparameter grid")
        cur_eps, cur_mp = pick.eps, pick.min_pts

    return TuningReport(
        cells=order,
        selected=DbscanParams(eps=cur_eps, min_pts=cur_mp),
        rounds_run=rounds_run,
    )


def timed_fit(points, params: DbscanParams, impl: str | None = None):
    """Run dbscan and report the wall-clock fit time (monotonic clock)."""
    t0 = time.perf_counter()
    assign = dbscan(points, params, impl=impl)
    return assign, time.perf_counter() - t0


def node_column_map(m: FeatureMatrix, node_of_column=None) -> dict[str, list[str]]:
    """Group a matrix's columns per node; temporal columns are shared."""
    mapping = node_of_column if node_of_column is not None else m.node_of_column
    temporal = [
        n for n in m.column_names
        if m.provenance.get(n) == PROVENANCE_TEMPORAL
    ]
    nodes = sorted({mapping[n] for n in m.column_names if n in mapping})
    return {
        node: [n for n in m.column_names if mapping.get(n) == node] + temporal
        for node in nodes
    }


def detect_black_holes(
    m: FeatureMatrix,
    params: DbscanParams,
    node_of_column: dict[str, str] | None = None,
    per_node: bool = True,
) -> FlagTable:
    """Flag (timestamp, node) pairs whose rows are density noise.

    The matrix must already be standardized. By default DBSCAN runs per
    node over that node's columns (plus the shared calendar columns); with
    per_node=False a single run over the whole matrix flags each noise row
    for every node.
    """
    groups = node_column_map(m, node_of_column)
    if not groups:
        raise ValueError("no node mapping available")
    flags: dict[str, np.ndarray] = {}
    if per_node:
        for node, cols in groups.items():
            node_cols = [c for c in cols if m.provenance.get(c) != PROVENANCE_TEMPORAL]
            if not node_cols:
                raise ValueError(f"node {node!r} has no feature columns")
            assign = dbscan(m.select(cols), params)
            flags[node] = assign.labels < 0
    else:
        assign = dbscan(m, params)
        noise = assign.labels < 0
        for node in groups:
            flags[node] = noise.copy()
    return FlagTable(timestamps=m.timestamps.copy(), flags=flags)

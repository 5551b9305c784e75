"""Shared test oracles and fixtures."""

from __future__ import annotations

import numpy as np


def brute_force_dbscan(X: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Independent DBSCAN oracle via explicit density-connectivity.

    Full pairwise distance matrix, core points by neighbor count (self
    included, inclusive boundary), transitive closure over the core-core
    eps graph in row order, and border points joining the
    earliest-numbered cluster owning a core neighbor.
    """
    n = len(X)
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels
    diff = X[:, None, :] - X[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    within = d2 <= eps * eps
    core = within.sum(axis=1) >= min_pts

    cluster = 0
    for seed in range(n):
        if not core[seed] or labels[seed] >= 0:
            continue
        stack = [seed]
        labels[seed] = cluster
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(within[u] & core):
                if labels[v] < 0:
                    labels[v] = cluster
                    stack.append(v)
        cluster += 1

    for i in range(n):
        if core[i] or not within[i][core].any():
            continue
        labels[i] = labels[np.flatnonzero(within[i] & core)].min()
    return labels


def as_partition(labels: np.ndarray) -> tuple[frozenset, frozenset]:
    """Canonical (clusters, noise) form for order-independent comparison."""
    labels = np.asarray(labels)
    clusters = frozenset(
        frozenset(np.flatnonzero(labels == c).tolist())
        for c in np.unique(labels[labels >= 0])
    )
    noise = frozenset(np.flatnonzero(labels < 0).tolist())
    return clusters, noise


def lattice_pair(spacing: float = 0.875, side: int = 10, gap: float = 100.0):
    """Two square lattices far apart; exact float coordinates.

    With min_pts=5, any eps below the spacing yields no core points (all
    cells invalid); any eps in [spacing, spacing*sqrt(2)) yields exactly
    the two lattice clusters.
    """
    xs = np.arange(side) * spacing
    grid = np.array([(x, y) for x in xs for y in xs])
    far = grid + np.array([gap, 0.0])
    return np.vstack([grid, far])


def small_scenario(horizon_days: int = 3, seed: int = 11) -> dict:
    """A fast scenario for CLI round-trips and determinism checks."""
    t0 = 1625097600
    return {
        "period_s": 300,
        "horizon": [t0, t0 + horizon_days * 86400],
        "seed": seed,
        "topology": "reference",
        "flows": [
            {"src": "Client-1", "dst": "Server-1", "rate_pps": 1000.0},
            {"src": "Client-2", "dst": "Server-2", "rate_pps": 800.0,
             "diurnal_phase_h": 5.0},
            {"src": "Client-1", "dst": "Server-2", "rate_pps": 600.0,
             "diurnal_phase_h": 10.0},
            {"src": "Client-2", "dst": "Server-1", "rate_pps": 500.0,
             "diurnal_phase_h": 15.0},
        ],
        "blackhole": {"prob": 0.10, "nodes": ["Node-1", "Node-7", "Node-8"],
                      "duration_s": 1800, "check_period_s": 3600},
        "mitigation": {"mode": "off", "hold_s": 1800},
        "noise": {"sigma": 0.03, "counter_leak_pkts": 1.0},
        "traffic": {"diurnal_amplitude": 0.45, "weekend_factor": 0.8,
                    "peak_hours": [2, 3], "peak_factor": 1.0},
        "routes": {"churn_sigma": 0.015, "peak_bump": 0.12},
        "detector": {"eps_grid": [2.0, 2.5, 3.0, 4.0], "min_pts_grid": [10, 20],
                     "rounds": 3, "max_noise_fraction": 0.2,
                     "nodes": ["Node-1", "Node-7", "Node-8"]},
        "bhmm": {},
    }

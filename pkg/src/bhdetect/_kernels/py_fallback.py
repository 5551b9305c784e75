"""Pure-numpy DBSCAN labeling.

Same contract as the compiled kernel: classic DBSCAN semantics with an
inclusive eps boundary, the point itself counted as a neighbor, clusters
numbered by the row index of their first core point, and border points
assigned to the earliest-numbered cluster that reaches them. Distances are
computed in blocks through BLAS (``|a-b|^2 = |a|^2 + |b|^2 - 2ab``) so
memory stays O(block * n).
"""

from __future__ import annotations

import numpy as np

_SENTINEL = np.iinfo(np.int64).max


def _block_rows(n: int) -> int:
    # Cap the scratch distance block around 256 MB.
    return max(32, min(4096, (1 << 25) // max(n, 1)))


def dbscan_labels(X: np.ndarray, eps: float, min_pts: int):
    """Label points: returns (labels, core_flags).

    labels[i] is -1 for noise or a cluster id in [0, k); core_flags[i]
    marks points with >= min_pts neighbors within eps (self included).
    """
    n = X.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    core = np.zeros(n, dtype=bool)
    if n == 0:
        return labels, core

    eps2 = eps * eps
    sq = np.einsum("ij,ij->i", X, X)
    block = _block_rows(n)

    counts = np.zeros(n, dtype=np.int64)
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        d2 = sq[i0:i1, None] + sq[None, :] - 2.0 * (X[i0:i1] @ X.T)
        d2[np.arange(i1 - i0), np.arange(i0, i1)] = 0.0  # exact self-distance
        counts[i0:i1] = np.count_nonzero(d2 <= eps2, axis=1)
    core = counts >= min_pts

    core_idx = np.flatnonzero(core)
    if core_idx.size == 0:
        return labels, core
    Xc = np.ascontiguousarray(X[core_idx])
    sqc = sq[core_idx]

    # Cluster the core points with a frontier BFS, seeding in row order so
    # cluster ids come out ordered by first core point.
    core_label = np.full(core_idx.size, -1, dtype=np.int64)
    cluster = 0
    for seed in range(core_idx.size):
        if core_label[seed] >= 0:
            continue
        core_label[seed] = cluster
        frontier = np.array([seed], dtype=np.int64)
        while frontier.size:
            todo = np.flatnonzero(core_label < 0)
            if todo.size == 0:
                break
            reached = np.zeros(todo.size, dtype=bool)
            Xt = Xc[todo]
            for f0 in range(0, frontier.size, block):
                fr = frontier[f0:f0 + block]
                d2 = sqc[fr, None] + sqc[None, todo] - 2.0 * (Xc[fr] @ Xt.T)
                reached |= (d2 <= eps2).any(axis=0)
            frontier = todo[reached]
            core_label[frontier] = cluster
        cluster += 1
    labels[core_idx] = core_label

    # Border points join the earliest-numbered cluster owning a core
    # neighbor; everything else stays noise.
    non_idx = np.flatnonzero(~core)
    for b0 in range(0, non_idx.size, block):
        nb = non_idx[b0:b0 + block]
        d2 = sq[nb, None] + sqc[None, :] - 2.0 * (X[nb] @ Xc.T)
        cand = np.where(d2 <= eps2, core_label[None, :], _SENTINEL)
        best = cand.min(axis=1)
        hit = best < _SENTINEL
        labels[nb[hit]] = best[hit]

    return labels, core

# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled DBSCAN core.

Pairwise scans with unrolled distance loops and a union-find over core
points. O(n) memory; produces exactly the same labels as the numpy
fallback (cluster ids ordered by first core point, border points joining
the earliest-numbered cluster with a core neighbor).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef cnp.int64_t SENTINEL = np.iinfo(np.int64).max


cdef inline cnp.int64_t _find(cnp.int64_t* parent, cnp.int64_t x) noexcept nogil:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


cdef inline double _sqdist(const double* a, const double* b, Py_ssize_t d) noexcept nogil:
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0, diff
    cdef Py_ssize_t k = 0
    while k + 4 <= d:
        diff = a[k] - b[k]
        s0 += diff * diff
        diff = a[k + 1] - b[k + 1]
        s1 += diff * diff
        diff = a[k + 2] - b[k + 2]
        s2 += diff * diff
        diff = a[k + 3] - b[k + 3]
        s3 += diff * diff
        k += 4
    while k < d:
        diff = a[k] - b[k]
        s0 += diff * diff
        k += 1
    return s0 + s1 + s2 + s3


def dbscan_labels(const double[:, ::1] X, double eps, long min_pts):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef double eps2 = eps * eps

    labels_arr = np.full(n, -1, dtype=np.int64)
    core_arr = np.zeros(n, dtype=bool)
    if n == 0:
        return labels_arr, core_arr

    counts_arr = np.ones(n, dtype=np.int64)  # self counts as a neighbor
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef cnp.int64_t[::1] labels = labels_arr
    cdef Py_ssize_t i, j

    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                if _sqdist(&X[i, 0], &X[j, 0], d) <= eps2:
                    counts[i] += 1
                    counts[j] += 1

    core_arr = counts_arr >= min_pts
    core_idx_arr = np.flatnonzero(core_arr).astype(np.int64)
    cdef Py_ssize_t n_core = core_idx_arr.shape[0]
    if n_core == 0:
        return labels_arr, core_arr
    cdef cnp.int64_t[::1] core_idx = core_idx_arr

    # Union-find over core points; only pairs in different components pay
    # for a distance computation.
    parent_arr = np.arange(n_core, dtype=np.int64)
    cdef cnp.int64_t[::1] parent = parent_arr
    cdef cnp.int64_t ri, rj
    cdef Py_ssize_t ci, cj
    with nogil:
        for ci in range(n_core):
            for cj in range(ci + 1, n_core):
                ri = _find(&parent[0], ci)
                rj = _find(&parent[0], cj)
                if ri == rj:
                    continue
                if _sqdist(&X[core_idx[ci], 0], &X[core_idx[cj], 0], d) <= eps2:
                    if ri < rj:
                        parent[rj] = ri
                    else:
                        parent[ri] = rj

    # Number components by their first core point (row order).
    comp_arr = np.empty(n_core, dtype=np.int64)
    cdef cnp.int64_t[::1] comp = comp_arr
    cdef cnp.int64_t n_clusters = 0
    cdef cnp.int64_t root
    rank_arr = np.full(n_core, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] rank = rank_arr
    for ci in range(n_core):
        root = _find(&parent[0], ci)
        if rank[root] < 0:
            rank[root] = n_clusters
            n_clusters += 1
        comp[ci] = rank[root]
        labels[core_idx[ci]] = rank[root]

    # Border assignment: earliest-numbered cluster with a core neighbor.
    non_idx_arr = np.flatnonzero(~core_arr).astype(np.int64)
    cdef cnp.int64_t[::1] non_idx = non_idx_arr
    cdef Py_ssize_t n_non = non_idx_arr.shape[0]
    cdef Py_ssize_t m
    cdef cnp.int64_t best
    with nogil:
        for m in range(n_non):
            i = non_idx[m]
            best = SENTINEL
            for cj in range(n_core):
                if comp[cj] >= best:
                    continue
                if _sqdist(&X[i, 0], &X[core_idx[cj], 0], d) <= eps2:
                    best = comp[cj]
                    if best == 0:
                        break
            if best != SENTINEL:
                labels[i] = best

    return labels_arr, core_arr

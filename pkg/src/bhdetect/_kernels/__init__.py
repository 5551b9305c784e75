"""Kernel selection for the DBSCAN core.

The compiled extension is used when it was built; otherwise the numpy
fallback takes over. Set ``BHDETECT_FORCE_FALLBACK=1`` to skip the
extension regardless (useful for the benchmark and for debugging).
"""

from __future__ import annotations

import os

import numpy as np

from . import py_fallback

if os.environ.get("BHDETECT_FORCE_FALLBACK"):
    _compiled = None
else:
    try:
        from . import _dbscan_cy as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def available_backends() -> list[str]:
    out = ["python"]
    if _compiled is not None:
        out.insert(0, "compiled")
    return out


def dbscan_labels(points, eps: float, min_pts: int, impl: str | None = None):
    """Run the selected DBSCAN kernel; returns (labels, core_flags).

    ``impl`` forces a backend ("compiled" or "python"); the default is
    whatever was selected at import.
    """
    X = np.ascontiguousarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("points must be a 2-D array")
    if impl is None:
        impl = BACKEND
    if impl == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not available")
        return _compiled.dbscan_labels(X, float(eps), int(min_pts))
    if impl == "python":
        return py_fallback.dbscan_labels(X, float(eps), int(min_pts))
    raise ValueError(f"unknown kernel backend {impl!r}")

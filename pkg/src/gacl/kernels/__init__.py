"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time.  Set ``GACL_DISABLE_NUMBA=1`` to
force the numpy path (or when numba is not importable).  Both backends expose
the same functions with identical signatures:

    raycast(grids, poses, n_rays, fov, r_max) -> (n, n_rays) normalized distances
    collides(grids, xy, radius)               -> (n,) bool
    bfs_distances(grid, src_row, src_col)     -> int32 field, -1 where unreachable
    edt(grid)                                 -> float64 distance to nearest occupied cell center
    ca_smooth(grid, iters)                     -> smoothed bool grid
    gae(rewards, values, dones, gamma, lam, last_values) -> (advantages, returns)
"""
from __future__ import annotations

import os

from . import numpy_impl

USE_NUMBA = os.environ.get("GACL_DISABLE_NUMBA", "0").lower() not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from . import numba_impl as _impl
    except ImportError:  # pragma: no cover - numba missing
        USE_NUMBA = False
        _impl = numpy_impl
else:
    _impl = numpy_impl

BACKEND = "numba" if USE_NUMBA else "numpy"

raycast = _impl.raycast
collides = _impl.collides
bfs_distances = _impl.bfs_distances
edt = _impl.edt
ca_smooth = _impl.ca_smooth
gae = _impl.gae

__all__ = [
    "BACKEND",
    "USE_NUMBA",
    "raycast",
    "collides",
    "bfs_distances",
    "edt",
    "ca_smooth",
    "gae",
]

"""Exact Wasserstein-1 distance between weighted planar point sets.

The transport problem is solved by the network simplex of POT (``ot.emd2``)
on the Euclidean cost matrix; grids become weighted sets of cell centers.
"""

import numpy as np
import ot
from scipy.spatial.distance import cdist

from ..errors import MassMismatchError, SizeCapError
from ..meanfield.grid import sample_density
from ..rng import SUBSAMPLE_DOMAIN, generator
from ._inputs import as_points, is_grid

SIZE_CAP = 4096
MASS_RTOL = 1e-9


def _weighted(x):
    if isinstance(x, tuple) and len(x) == 2:
        pts = as_points(x[0])
        w = np.asarray(x[1], dtype=np.float64)
        if w.shape != (pts.shape[0],) or np.any(w < 0):
            raise ValueError("weights must be a nonnegative vector, one per point")
        return pts, w
    if is_grid(x):
        X, Y = x.grid.centers()
        w = x.values.ravel() * x.h**2
        keep = w > 0
        return np.stack([X.ravel()[keep], Y.ravel()[keep]], axis=1), w[keep]
    pts = as_points(x)
    return pts, np.full(pts.shape[0], 1.0 / pts.shape[0])


def grid_support_size(f):
    return int(np.count_nonzero(f.values))


def _shrink_grid(f, n, seed):
    pts = sample_density(f, n, generator(seed, SUBSAMPLE_DOMAIN))
    return pts, np.full(n, 1.0 / n)


def wasserstein1(a, b, cap=SIZE_CAP, seed=0, max_iter=50_000_000):
    """Optimal transport cost with ground cost |x - y|.

    ``a`` and ``b`` may be ParticleStates or (n, 2) arrays (uniform weights),
    ``(points, weights)`` tuples, or DensityGrids.  A grid whose support would
    push the combined size past ``cap`` is replaced by an i.i.d. subsample
    drawn with ``seed``; point sets are never subsampled and raise SizeCapError.
    """
    grids = [is_grid(a), is_grid(b)]
    sizes = [grid_support_size(x) if g else None for x, g in zip((a, b), grids)]
    if any(grids):
        fixed = sum(len(_weighted(x)[1]) for x, g in zip((a, b), grids) if not g)
        room = cap - fixed
        n_grids = sum(grids)
        if sum(s for s in sizes if s is not None) > room:
            share = room // n_grids
            if share < 1:
                raise SizeCapError(f"no room left under the cap {cap} for grid samples")
            a = _shrink_grid(a, share, seed) if grids[0] else a
            b = _shrink_grid(b, share, seed + 1) if grids[1] else b
    xa, wa = _weighted(a)
    xb, wb = _weighted(b)
    if len(wa) + len(wb) > cap:
        raise SizeCapError(f"combined support {len(wa) + len(wb)} exceeds the exact-solver cap {cap}")
    ma, mb = wa.sum(), wb.sum()
    if abs(ma - mb) > MASS_RTOL * max(ma, mb):
        raise MassMismatchError(f"total masses differ: {ma!r} vs {mb!r}")
    wa = wa / ma
    wb = wb / mb
    # direct differences: the expanded form in ot.dist leaves ~1e-8 on coincident points
    M = cdist(xa, xb)
    cost, log = ot.emd2(wa, wb, M, numItermax=max_iter, log=True)
    if log.get("warning"):
        raise RuntimeError(f"network simplex did not converge: {log['warning']}")
    return float(max(cost, 0.0)) * float(ma)

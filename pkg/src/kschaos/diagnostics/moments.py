"""Moments and the pairwise inverse-power interaction integral."""

import numpy as np

from .. import _forces
from ..errors import DuplicatePointsError
from ..meanfield.convolution import power_convolution
from ._inputs import as_points, is_grid


def moment(x, k):
    """M_k: (1/N) sum |x_i|^k for samples, h^2 sum |x|^k f for a grid."""
    if not k > 0:
        raise ValueError("moment order must be > 0")
    if is_grid(x):
        X, Y = x.grid.centers()
        return float(x.h**2 * np.sum(np.hypot(X, Y) ** k * x.values))
    pos = as_points(x)
    return float(np.mean(np.hypot(pos[:, 0], pos[:, 1]) ** k))


def interaction_integral(x, gamma):
    """Mean of |x - y|^-gamma over pairs: (1/(N(N-1))) sum_{i != j} for samples,
    the double integral int int f(x) f(y) |x - y|^-gamma for a grid."""
    if not 0 < gamma < 2:
        raise ValueError("gamma must lie in (0, 2)")
    if is_grid(x):
        v = x.values
        conv = power_convolution(v, x.grid, gamma)
        return float(x.h**2 * np.sum(v * conv))
    pos = as_points(x)
    n = pos.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    s, mr2 = _forces.pair_power_sum(pos, gamma)
    if mr2 == 0.0:
        raise DuplicatePointsError("interaction integral needs distinct points")
    return 2.0 * s / (n * (n - 1))

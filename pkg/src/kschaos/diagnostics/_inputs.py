import numpy as np

from ..meanfield.grid import DensityGrid


def is_grid(x):
    return isinstance(x, DensityGrid)


def as_points(x):
    """Positions array (n, 2) from a ParticleState or array-like."""
    pos = getattr(x, "positions", x)
    pos = np.asarray(pos, dtype=np.float64)
    if pos.ndim == 1 and pos.shape == (2,):
        pos = pos[None, :]
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise ValueError(f"expected points of shape (n, 2), got {pos.shape}")
    return pos

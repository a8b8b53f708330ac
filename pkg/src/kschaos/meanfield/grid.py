"""Uniform square-cell grids and unit-mass densities on them."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from ..errors import InvalidParamsError

MASS_TOL = 1e-8


@dataclass(frozen=True)
class GridSpec:
    """nx x ny square cells of width h; ``origin`` is the center of cell (0, 0)."""

    nx: int
    ny: int
    h: float
    origin: tuple

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 16 or self.ny < 16:
            raise InvalidParamsError("grids need nx, ny >= 16")
        if not self.h > 0:
            raise InvalidParamsError("cell width h must be > 0")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def square(cls, n, half_width, center=(0.0, 0.0)):
        """n x n cells covering [c - L, c + L]^2."""
        h = 2.0 * half_width / n
        return cls(n, n, h, (center[0] - half_width + 0.5 * h, center[1] - half_width + 0.5 * h))

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def lower(self):
        return (self.origin[0] - 0.5 * self.h, self.origin[1] - 0.5 * self.h)

    @property
    def upper(self):
        return (self.origin[0] + (self.nx - 0.5) * self.h, self.origin[1] + (self.ny - 0.5) * self.h)

    def axes(self):
        x = self.origin[0] + self.h * np.arange(self.nx)
        y = self.origin[1] + self.h * np.arange(self.ny)
        return x, y

    def centers(self):
        """Arrays X, Y of shape (nx, ny); index [i, j] is x = origin_x + i h, y = origin_y + j h."""
        x, y = self.axes()
        return np.meshgrid(x, y, indexing="ij")

    def edges(self):
        lo = self.lower
        return lo[0] + self.h * np.arange(self.nx + 1), lo[1] + self.h * np.arange(self.ny + 1)

    def distance_to_boundary(self, point):
        lo, hi = self.lower, self.upper
        return min(point[0] - lo[0], hi[0] - point[0], point[1] - lo[1], hi[1] - point[1])

    def to_dict(self):
        return {"nx": self.nx, "ny": self.ny, "h": self.h, "origin": list(self.origin)}


@dataclass(frozen=True)
class DensityGrid:
    """Cell-averaged nonnegative density of unit mass."""

    grid: GridSpec
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ValueError(f"values have shape {v.shape}, grid is {self.grid.shape}")
        if not np.all(np.isfinite(v)) or v.min() < 0.0:
            raise ValueError("density values must be finite and nonnegative")
        m = self.grid.h**2 * v.sum()
        if abs(m - 1.0) > MASS_TOL:
            raise ValueError(f"density mass {m!r} differs from 1 by more than {MASS_TOL}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "time", float(self.time))

    @property
    def h(self):
        return self.grid.h

    @property
    def mass(self):
        return float(self.grid.h**2 * self.values.sum())

    def with_values(self, values, time):
        return DensityGrid(self.grid, values, time)


def normalized(grid, values, time=0.0):
    values = np.maximum(np.asarray(values, dtype=np.float64), 0.0)
    return DensityGrid(grid, values / (grid.h**2 * values.sum()), time)


def _gauss_cell_weights(edges, mean, std):
    c = erf((edges - mean) / (std * math.sqrt(2.0)))
    return 0.5 * np.diff(c)


def gaussian_cell_averages(grid, mean, std):
    """Exact cell averages of the isotropic normal density N(mean, std^2 I)."""
    ex, ey = grid.edges()
    wx = _gauss_cell_weights(ex, mean[0], std)
    wy = _gauss_cell_weights(ey, mean[1], std)
    return np.outer(wx, wy) / grid.h**2


def disk_cell_averages(grid, center, radius, sub=16):
    """Uniform disk density averaged over each cell with sub x sub midpoint supersampling."""
    X, Y = grid.centers()
    off = (np.arange(sub) + 0.5) / sub - 0.5
    cover = np.zeros(grid.shape)
    for a in off:
        for b in off:
            dx = X + a * grid.h - center[0]
            dy = Y + b * grid.h - center[1]
            cover += dx * dx + dy * dy <= radius * radius
    return cover / (sub * sub) / (math.pi * radius * radius)


def density_from_initial(ic, grid):
    """Discretize an InitialCondition on ``grid`` (``from_file`` reads a KSGRID1 file)."""
    if ic.kind == "gaussian":
        v = gaussian_cell_averages(grid, ic.mean, ic.std)
    elif ic.kind == "two_clusters":
        v = 0.5 * sum(gaussian_cell_averages(grid, c, ic.std) for c in ic.centers)
    elif ic.kind == "uniform_disk":
        v = disk_cell_averages(grid, ic.center, ic.radius)
    else:
        from .gridio import read_grid

        g = read_grid(ic.path)
        if g.grid != grid:
            raise InvalidParamsError(f"{ic.path}: grid {g.grid} does not match the configured grid {grid}")
        return DensityGrid(grid, g.values, 0.0)
    return normalized(grid, v)


def sample_density(f: DensityGrid, n, rng):
    """n i.i.d. points from the piecewise-constant density: pick a cell by mass, then a uniform point in it."""
    p = f.values.ravel() * f.h**2
    p = p / p.sum()
    idx = rng.choice(p.size, size=n, p=p)
    i, j = np.unravel_index(idx, f.grid.shape)
    u = rng.random((n, 2)) - 0.5
    x = f.grid.origin[0] + (i + u[:, 0]) * f.h
    y = f.grid.origin[1] + (j + u[:, 1]) * f.h
    return np.stack([x, y], axis=1)


def boundary_ring_mass(f: DensityGrid, width=2):
    v = f.values
    inner = v[width:-width, width:-width].sum()
    return float(f.h**2 * (v.sum() - inner))

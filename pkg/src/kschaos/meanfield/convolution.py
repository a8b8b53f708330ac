"""Free-space convolution of grid densities with the attraction kernel.

The discrete field at cell center x_i is ``sum_j W(x_i - x_j) f_j`` with
``W(z) = h^2 K(z)`` off the diagonal.  On the diagonal the weight is h^2 times
the exact mean of the kernel over a centered cell: zero for the odd vector
kernel K, and a closed polar-coordinate integral for |z|^-gamma.  The sum is
evaluated with real FFTs on arrays zero-padded to at least 2n-1 per axis, so
there is no periodic wrap-around.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from ..kernel import KernelParams, radial_power_cell_average
from .grid import DensityGrid, GridSpec


def offsets(nx, ny, h):
    """Offset vectors (kx h, ky h) for kx in [-(nx-1), nx-1], ky in [-(ny-1), ny-1]."""
    ox = h * np.arange(-(nx - 1), nx)
    oy = h * np.arange(-(ny - 1), ny)
    return np.meshgrid(ox, oy, indexing="ij")


def kernel_weights(nx, ny, h, alpha):
    """Weights (Wx, Wy) of shape (2nx-1, 2ny-1) for the vector kernel."""
    OX, OY = offsets(nx, ny, h)
    r2 = OX * OX + OY * OY
    r2[nx - 1, ny - 1] = 1.0
    w = h * h * np.exp(-0.5 * (alpha + 1.0) * np.log(r2))
    wx, wy = OX * w, OY * w
    wx[nx - 1, ny - 1] = 0.0
    wy[nx - 1, ny - 1] = 0.0
    return wx, wy


def power_weights(nx, ny, h, gamma):
    """Weights for the scalar kernel |z|^-gamma, diagonal from the exact cell average."""
    OX, OY = offsets(nx, ny, h)
    r2 = OX * OX + OY * OY
    r2[nx - 1, ny - 1] = 1.0
    w = h * h * np.exp(-0.5 * gamma * np.log(r2))
    w[nx - 1, ny - 1] = h * h * radial_power_cell_average(gamma, h)
    return w


class ConvolutionPlan:
    """Precomputed spectra of a set of weight arrays for one grid shape."""

    def __init__(self, nx, ny, weights):
        self.nx, self.ny = nx, ny
        self.shape = (sfft.next_fast_len(2 * nx - 1, real=True), sfft.next_fast_len(2 * ny - 1, real=True))
        self.spectra = [sfft.rfft2(w, s=self.shape) for w in weights]

    def apply(self, values):
        fv = sfft.rfft2(values, s=self.shape)
        nx, ny = self.nx, self.ny
        out = []
        for spec in self.spectra:
            full = sfft.irfft2(fv * spec, s=self.shape)
            out.append(full[nx - 1 : 2 * nx - 1, ny - 1 : 2 * ny - 1])
        return out


@lru_cache(maxsize=32)
def kernel_plan(nx, ny, h, alpha):
    return ConvolutionPlan(nx, ny, kernel_weights(nx, ny, h, alpha))


@lru_cache(maxsize=32)
def power_plan(nx, ny, h, gamma):
    return ConvolutionPlan(nx, ny, [power_weights(nx, ny, h, gamma)])


@dataclass(frozen=True)
class VelocityField:
    """(K * f) sampled at cell centers; components have the grid's shape."""

    grid: GridSpec
    kx: np.ndarray
    ky: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if not (np.all(np.isfinite(self.kx)) and np.all(np.isfinite(self.ky))):
            raise ValueError("velocity field must be finite")

    def magnitude_max(self):
        return float(np.sqrt(self.kx**2 + self.ky**2).max())


def convolve_values(values, grid: GridSpec, alpha):
    kx, ky = kernel_plan(grid.nx, grid.ny, grid.h, alpha).apply(values)
    return kx, ky


def kernel_convolution(f: DensityGrid, p: KernelParams):
    """K * f on the grid of ``f`` (the cut-off ``p.eps`` is ignored)."""
    kx, ky = convolve_values(f.values, f.grid, p.alpha)
    return VelocityField(f.grid, kx, ky, f.time)


def power_convolution(values, grid: GridSpec, gamma):
    return power_plan(grid.nx, grid.ny, grid.h, gamma).apply(values)[0]

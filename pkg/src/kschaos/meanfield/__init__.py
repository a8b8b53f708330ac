"""Mean-field limit: grid solver for the PDE and the nonlinear SDE driven by it."""

from .convolution import VelocityField, kernel_convolution
from .grid import DensityGrid, GridSpec, density_from_initial, sample_density
from .mckean import mckean_vlasov_simulate
from .solver import PdeConfig, PdeSolution, pde_solve, pde_step
from .weak import TestFunction, weak_form_residual

__all__ = [
    "DensityGrid",
    "GridSpec",
    "PdeConfig",
    "PdeSolution",
    "TestFunction",
    "VelocityField",
    "density_from_initial",
    "kernel_convolution",
    "mckean_vlasov_simulate",
    "pde_solve",
    "pde_step",
    "sample_density",
    "weak_form_residual",
]

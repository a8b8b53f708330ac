"""Functionals of particle clouds and grid densities."""

from .balance import entropy_balance_residual, entropy_balance_series
from .chaos import ChaosTable, chaos_convergence_table
from .entropy import entropy_grid, entropy_knn, fisher_grid
from .moments import interaction_integral, moment
from .report import DiagnosticsReport, reports_csv
from .wasserstein import SIZE_CAP, wasserstein1

__all__ = [
    "ChaosTable",
    "DiagnosticsReport",
    "SIZE_CAP",
    "chaos_convergence_table",
    "entropy_balance_residual",
    "entropy_balance_series",
    "entropy_grid",
    "entropy_knn",
    "fisher_grid",
    "interaction_integral",
    "moment",
    "reports_csv",
    "wasserstein1",
]

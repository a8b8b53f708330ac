"""Entropy / Fisher-information balance along a solved run."""

from dataclasses import dataclass

import numpy as np

from .entropy import entropy_grid, fisher_grid
from .moments import interaction_integral


def _cumtrapz(values, times):
    out = np.zeros(len(values))
    if len(values) > 1:
        out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(times))
    return out


@dataclass(frozen=True)
class BalanceSeries:
    times: np.ndarray
    entropy: np.ndarray
    fisher: np.ndarray
    interaction: np.ndarray
    fisher_integral: np.ndarray
    interaction_integral: np.ndarray
    residual: np.ndarray


def entropy_balance_series(frames, p):
    """H(f_t) + int_0^t I - H(f_0) - chi (1 - alpha) int_0^t int int |x-y|^-(alpha+1) f_s f_s, per frame."""
    frames = list(frames)
    times = np.array([f.time for f in frames])
    H = np.array([entropy_grid(f) for f in frames])
    I = np.array([fisher_grid(f) for f in frames])
    if p.chi != 0.0:
        J = np.array([interaction_integral(f, p.alpha + 1.0) for f in frames])
    else:
        J = np.zeros(len(frames))
    cI = _cumtrapz(I, times)
    cJ = _cumtrapz(J, times)
    res = np.abs(H + cI - H[0] - p.chi * (1.0 - p.alpha) * cJ)
    return BalanceSeries(times, H, I, J, cI, cJ, res)


def entropy_balance_residual(solution, p, t):
    """Absolute residual of the entropy balance at recorded time t (trapezoid rule in time)."""
    frames = solution.upto(t) if hasattr(solution, "upto") else [f for f in solution if f.time <= t + 1e-12]
    if len(frames) == 1:
        return 0.0
    return float(entropy_balance_series(frames, p).residual[-1])

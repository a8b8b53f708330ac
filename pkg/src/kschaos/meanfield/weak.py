"""Weak-form residual of a solved run against smooth test functions."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import sympy as sp

from .convolution import convolve_values

_x, _y = sp.symbols("x y", real=True)


def _trapezoid(values, times):
    values = np.asarray(values, dtype=np.float64)
    if len(values) < 2:
        return 0.0
    return float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(times)))


@dataclass(frozen=True)
class TestFunction:
    """Symbolic test function from a small family.

    kind ``constant``: phi = 1.  ``gaussian``: phi = exp(-|x - c|^2 / (2 w^2)).
    ``poly_bump``: (x - cx)^px (y - cy)^py times the same Gaussian bump.
    """

    __test__ = False  # not a pytest class

    kind: str = "gaussian"
    center: tuple = (0.0, 0.0)
    width: float = 1.0
    powers: tuple = (0, 0)

    def __post_init__(self):
        if self.kind not in ("constant", "gaussian", "poly_bump"):
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if not self.width > 0:
            raise ValueError("width must be > 0")

    @cached_property
    def expr(self):
        if self.kind == "constant":
            return sp.Integer(1)
        cx, cy = (sp.nsimplify(c) for c in self.center)
        w = sp.nsimplify(self.width)
        bump = sp.exp(-((_x - cx) ** 2 + (_y - cy) ** 2) / (2 * w**2))
        if self.kind == "gaussian":
            return bump
        px, py = self.powers
        return (_x - cx) ** int(px) * (_y - cy) ** int(py) * bump

    @cached_property
    def _funcs(self):
        e = self.expr
        parts = [e, sp.diff(e, _x), sp.diff(e, _y), sp.diff(e, _x, 2) + sp.diff(e, _y, 2)]
        return [sp.lambdify((_x, _y), q, "numpy") for q in parts]

    def _eval(self, k, X, Y):
        return np.broadcast_to(np.asarray(self._funcs[k](X, Y), dtype=np.float64), X.shape)

    def value(self, X, Y):
        return self._eval(0, X, Y)

    def grad(self, X, Y):
        return self._eval(1, X, Y), self._eval(2, X, Y)

    def laplacian(self, X, Y):
        return self._eval(3, X, Y)


def weak_form_terms(frames, p, phi: TestFunction):
    """Per-frame integrals (int phi f, int Lap(phi) f, chi int grad(phi).(K*f) f)."""
    grid = frames[0].grid
    X, Y = grid.centers()
    h2 = grid.h**2
    val = phi.value(X, Y)
    lap = phi.laplacian(X, Y)
    gx, gy = phi.grad(X, Y)
    a, b, c = [], [], []
    for f in frames:
        v = f.values
        a.append(h2 * np.sum(val * v))
        b.append(h2 * np.sum(lap * v))
        if p.chi != 0.0 and phi.kind != "constant":
            kx, ky = convolve_values(v, grid, p.alpha)
            c.append(p.chi * h2 * np.sum((gx * kx + gy * ky) * v))
        else:
            c.append(0.0)
    return np.array(a), np.array(b), np.array(c)


def weak_form_residual(solution, p, phi: TestFunction, t):
    """|int phi f_t - int phi f_0 - int_0^t int Lap(phi) f_s + chi int_0^t int int K(x-y).grad(phi)(x) f_s f_s|.

    Space integrals are grid sums over cell centers, time integrals the
    trapezoid rule over the recorded frames in [0, t].
    """
    frames = solution.upto(t) if hasattr(solution, "upto") else [f for f in solution if f.time <= t + 1e-12]
    times = np.array([f.time for f in frames])
    a, b, c = weak_form_terms(frames, p, phi)
    return abs(a[-1] - a[0] - _trapezoid(b, times) + _trapezoid(c, times))

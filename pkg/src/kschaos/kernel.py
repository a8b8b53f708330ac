"""Attraction kernel K(x) = x/|x|^(alpha+1), its potential, divergence and cut-off version.

All functions accept a single point ``(x, y)`` or an array of shape ``(..., 2)``
and broadcast over the leading axes.  Powers of |x| are evaluated as
``exp(c * log(|x|^2))`` so that no square root is taken on the hot path; the
regularized kernel goes through the very same expression whenever
``|x| >= eps`` which makes it bit-identical to the exact kernel there.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InvalidParamsError, SingularInputError


@dataclass(frozen=True)
class KernelParams:
    alpha: float
    chi: float = 1.0
    eps: float = 0.0

    def __post_init__(self):
        a, c, e = float(self.alpha), float(self.chi), float(self.eps)
        if not math.isfinite(a) or not 0.0 < a < 1.0:
            raise InvalidParamsError(
                f"alpha must lie in the open interval (0, 1) (sub-critical kernel), got {self.alpha!r}"
            )
        if not math.isfinite(c) or c < 0.0:
            raise InvalidParamsError(f"chi must be finite and >= 0, got {self.chi!r}")
        if not math.isfinite(e) or e < 0.0:
            raise InvalidParamsError(f"eps must be finite and >= 0, got {self.eps!r}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "chi", c)
        object.__setattr__(self, "eps", e)

    @property
    def regularized(self):
        return self.eps > 0.0

    def replace(self, **changes):
        d = {"alpha": self.alpha, "chi": self.chi, "eps": self.eps}
        d.update(changes)
        return KernelParams(**d)


def _as_points(x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (2,):
        raise ValueError(f"expected points with trailing dimension 2, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")
    return x


def _sqnorm(x):
    return x[..., 0] * x[..., 0] + x[..., 1] * x[..., 1]


def _check_nonzero(r2):
    if np.any(r2 == 0.0):
        raise SingularInputError("kernel evaluated at x = 0")


def _require_eps(p):
    if not p.eps > 0.0:
        raise InvalidParamsError("regularized kernel needs eps > 0")


def _inv_pow(r2, alpha):
    # |x|^{-(alpha+1)} from |x|^2
    return np.exp(-0.5 * (alpha + 1.0) * np.log(r2))


def eval_K(x, p: KernelParams):
    """Exact kernel x / |x|^(alpha+1)."""
    x = _as_points(x)
    r2 = _sqnorm(x)
    _check_nonzero(r2)
    return x * _inv_pow(r2, p.alpha)[..., None]


def eval_K_reg(x, p: KernelParams):
    """Cut-off kernel x / max(|x|, eps)^(alpha+1); finite everywhere, zero at the origin."""
    _require_eps(p)
    x = _as_points(x)
    s = np.maximum(_sqnorm(x), p.eps * p.eps)
    return x * _inv_pow(s, p.alpha)[..., None]


def eval_potential(x, p: KernelParams):
    """Potential Phi(x) = |x|^(1-alpha) / (alpha - 1), so that K = -grad Phi."""
    x = _as_points(x)
    r2 = _sqnorm(x)
    _check_nonzero(r2)
    return np.exp(0.5 * (1.0 - p.alpha) * np.log(r2)) / (p.alpha - 1.0)


def div_K(x, p: KernelParams):
    x = _as_points(x)
    r2 = _sqnorm(x)
    _check_nonzero(r2)
    return (1.0 - p.alpha) * _inv_pow(r2, p.alpha)


def div_K_reg(x, p: KernelParams):
    """(1-alpha)/|x|^(alpha+1) outside the cut-off disk, 2/eps^(alpha+1) inside it."""
    _require_eps(p)
    x = _as_points(x)
    r2 = _sqnorm(x)
    e2 = p.eps * p.eps
    outside = (1.0 - p.alpha) * _inv_pow(np.where(r2 >= e2, r2, 1.0), p.alpha)
    inside = 2.0 / p.eps ** (p.alpha + 1.0)
    return np.where(r2 >= e2, outside, inside)


def lipschitz_rhs(x, y, p: KernelParams):
    """Upper bound 2(alpha+2)|x-y|(|x|^-(alpha+1) + |y|^-(alpha+1)) for |K(x) - K(y)|."""
    x = _as_points(x)
    y = _as_points(y)
    rx, ry = _sqnorm(x), _sqnorm(y)
    _check_nonzero(rx)
    _check_nonzero(ry)
    d = x - y
    dist = np.sqrt(_sqnorm(d))
    return 2.0 * (p.alpha + 2.0) * dist * (_inv_pow(rx, p.alpha) + _inv_pow(ry, p.alpha))


def radial_power_cell_average(gamma, h):
    """Mean of |z|^-gamma over the square [-h/2, h/2]^2 (finite for gamma < 2).

    In polar coordinates the square splits into 8 congruent triangles, each
    giving (h/(2 cos t))^(2-gamma) / (2-gamma) after the radial integration.
    """
    if not 0.0 <= gamma < 2.0:
        raise ValueError("gamma must lie in [0, 2)")
    ang, _ = integrate.quad(lambda t: math.cos(t) ** (gamma - 2.0), 0.0, math.pi / 4, epsabs=1e-15, epsrel=1e-13)
    return 8.0 * (0.5 * h) ** (2.0 - gamma) * ang / ((2.0 - gamma) * h * h)

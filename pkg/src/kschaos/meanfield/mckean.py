"""Independent copies of the nonlinear SDE dX = -chi (K*f_t)(X) dt + sqrt(2) dB driven by a solved density."""

import math

import numpy as np

from ..errors import OutOfDomainError
from ..particles import ParticleState, draw_from_law
from ..rng import INITIAL_DOMAIN, CounterNormals, generator
from .convolution import convolve_values
from .grid import sample_density


class _FieldTable:
    """Velocity -chi (K*f) at every stored frame, interpolated bilinearly in space and linearly in time."""

    def __init__(self, frames, p):
        self.grid = frames[0].grid
        self.times = np.array([f.time for f in frames])
        vx, vy = [], []
        for f in frames:
            if p.chi != 0.0:
                kx, ky = convolve_values(f.values, self.grid, p.alpha)
            else:
                kx = ky = np.zeros(self.grid.shape)
            vx.append(-p.chi * kx)
            vy.append(-p.chi * ky)
        self.vx = np.array(vx)
        self.vy = np.array(vy)

    def _bilinear(self, field, x):
        g = self.grid
        u = (x[:, 0] - g.origin[0]) / g.h
        w = (x[:, 1] - g.origin[1]) / g.h
        i = np.clip(np.floor(u).astype(np.int64), 0, g.nx - 2)
        j = np.clip(np.floor(w).astype(np.int64), 0, g.ny - 2)
        a = np.clip(u - i, 0.0, 1.0)
        b = np.clip(w - j, 0.0, 1.0)
        return (
            (1 - a) * (1 - b) * field[i, j]
            + a * (1 - b) * field[i + 1, j]
            + (1 - a) * b * field[i, j + 1]
            + a * b * field[i + 1, j + 1]
        )

    def __call__(self, t, x):
        times = self.times
        if len(times) == 1 or t <= times[0]:
            k, lam = 0, 0.0
        elif t >= times[-1]:
            k, lam = len(times) - 2, 1.0
        else:
            k = int(np.searchsorted(times, t, side="right") - 1)
            lam = (t - times[k]) / (times[k + 1] - times[k])
        if lam == 0.0:
            return np.stack([self._bilinear(self.vx[k], x), self._bilinear(self.vy[k], x)], axis=1)
        k1 = k + 1
        vx = (1 - lam) * self._bilinear(self.vx[k], x) + lam * self._bilinear(self.vx[k1], x)
        vy = (1 - lam) * self._bilinear(self.vy[k], x) + lam * self._bilinear(self.vy[k1], x)
        return np.stack([vx, vy], axis=1)


def _reflect(x, lo, hi):
    span = hi - lo
    y = np.mod(x - lo, 2 * span)
    return lo + np.where(y > span, 2 * span - y, y)


def mckean_vlasov_simulate(solution, p, n_samples, dt, seed, *, strict=False, return_events=False):
    """Euler-Maruyama for n_samples independent copies over the solved time range.

    Initial points are drawn from the run's initial law (from the first frame
    when that law is a file).  Samples that leave the grid are reflected back
    and counted in an ``out_of_domain`` event, or raise OutOfDomainError with
    ``strict=True``.
    """
    frames = list(solution)
    cfg = getattr(solution, "config", None)
    field = _FieldTable(frames, p)
    grid = field.grid
    t0, t1 = frames[0].time, frames[-1].time
    rng = generator(seed, INITIAL_DOMAIN)
    if cfg is not None and cfg.initial.kind != "from_file":
        x = draw_from_law(cfg.initial, n_samples, rng)
    else:
        x = sample_density(frames[0], n_samples, rng)
    noise = CounterNormals(seed)
    n_steps = max(1, math.ceil((t1 - t0) / dt - 1e-9)) if t1 > t0 else 0
    step = (t1 - t0) / n_steps if n_steps else 0.0
    lo = np.array(grid.lower)
    hi = np.array(grid.upper)
    events = []
    for k in range(n_steps):
        t = t0 + k * step
        x = x + field(t, x) * step + math.sqrt(2.0 * step) * noise.normals(k, n_samples)
        out = np.any((x < lo) | (x > hi), axis=1)
        if out.any():
            if strict:
                raise OutOfDomainError(f"{int(out.sum())} samples left the grid at t={t + step!r}")
            events.append((t + step, "out_of_domain", int(out.sum())))
            x = _reflect(x, lo, hi)
    state = ParticleState(x, t1)
    return (state, events) if return_events else state

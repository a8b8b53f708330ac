"""Numba loops for pair sums.

Each target particle ``i`` owns its accumulator and visits sources ``j`` in a
fixed order, so results do not depend on the number of worker threads.
"""

import math

import numpy as np
from numba import njit, prange

# Upper bound on cells of the auxiliary grid used by the cell-list backend.
_MAX_CELLS_PER_PARTICLE = 4


@njit(parallel=True, cache=True)
def direct_sum(pos, alpha, eps2, acc, minr2, coll):
    """acc[i] = sum_{j != i} K_eps(x_i - x_j); eps2 = 0 selects the exact kernel."""
    n = pos.shape[0]
    c = -0.5 * (alpha + 1.0)
    for i in prange(n):
        xi = pos[i, 0]
        yi = pos[i, 1]
        bx = 0.0
        by = 0.0
        mr = np.inf
        hit = -1
        for j in range(n):
            if j == i:
                continue
            dx = xi - pos[j, 0]
            dy = yi - pos[j, 1]
            r2 = dx * dx + dy * dy
            if r2 < mr:
                mr = r2
            s = r2 if r2 >= eps2 else eps2
            if s == 0.0:
                hit = j
                continue
            w = math.exp(c * math.log(s))
            bx += dx * w
            by += dy * w
        acc[i, 0] = bx
        acc[i, 1] = by
        minr2[i] = mr
        coll[i] = hit


@njit(cache=True)
def _bin_particles(pos, cell):
    n = pos.shape[0]
    x0 = pos[0, 0]
    y0 = pos[0, 1]
    x1 = x0
    y1 = y0
    for i in range(n):
        x0 = min(x0, pos[i, 0])
        x1 = max(x1, pos[i, 0])
        y0 = min(y0, pos[i, 1])
        y1 = max(y1, pos[i, 1])
    ncx = int((x1 - x0) / cell) + 1
    ncy = int((y1 - y0) / cell) + 1
    cx = np.empty(n, np.int64)
    cy = np.empty(n, np.int64)
    key = np.empty(n, np.int64)
    for i in range(n):
        cx[i] = min(int((pos[i, 0] - x0) / cell), ncx - 1)
        cy[i] = min(int((pos[i, 1] - y0) / cell), ncy - 1)
        key[i] = cx[i] * ncy + cy[i]
    order = np.argsort(key, kind="mergesort")
    start = np.zeros(ncx * ncy + 1, np.int64)
    for i in range(n):
        start[key[i] + 1] += 1
    for k in range(ncx * ncy):
        start[k + 1] += start[k]
    return cx, cy, ncx, ncy, order, start


@njit(parallel=True, cache=True)
def _cell_sum(pos, alpha, eps2, cx, cy, ncx, ncy, order, start, acc, minr2, coll):
    n = pos.shape[0]
    c = -0.5 * (alpha + 1.0)
    for i in prange(n):
        xi = pos[i, 0]
        yi = pos[i, 1]
        bx = 0.0
        by = 0.0
        mr = np.inf
        hit = -1
        # near field: the 3x3 block of cells around i, cut-off kernel
        for ax in range(max(cx[i] - 1, 0), min(cx[i] + 2, ncx)):
            for ay in range(max(cy[i] - 1, 0), min(cy[i] + 2, ncy)):
                k = ax * ncy + ay
                for m in range(start[k], start[k + 1]):
                    j = order[m]
                    if j == i:
                        continue
                    dx = xi - pos[j, 0]
                    dy = yi - pos[j, 1]
                    r2 = dx * dx + dy * dy
                    if r2 < mr:
                        mr = r2
                    s = r2 if r2 >= eps2 else eps2
                    if s == 0.0:
                        hit = j
                        continue
                    w = math.exp(c * math.log(s))
                    bx += dx * w
                    by += dy * w
        # far field: everything else is at distance >= cell >= eps
        for j in range(n):
            if abs(cx[j] - cx[i]) <= 1 and abs(cy[j] - cy[i]) <= 1:
                continue
            dx = xi - pos[j, 0]
            dy = yi - pos[j, 1]
            r2 = dx * dx + dy * dy
            if r2 < mr:
                mr = r2
            w = math.exp(c * math.log(r2))
            bx += dx * w
            by += dy * w
        acc[i, 0] = bx
        acc[i, 1] = by
        minr2[i] = mr
        coll[i] = hit


def cell_list_sum(pos, alpha, eps, cutoff, acc, minr2, coll):
    n = pos.shape[0]
    cell = max(eps, cutoff)
    span = max(np.ptp(pos[:, 0]), np.ptp(pos[:, 1]), cell)
    # keep the auxiliary grid at O(N) cells; coarser cells only move pairs to the near list
    max_side = max(int(math.sqrt(_MAX_CELLS_PER_PARTICLE * n)), 1)
    cell = max(cell, span / max_side)
    cx, cy, ncx, ncy, order, start = _bin_particles(pos, cell)
    _cell_sum(pos, alpha, eps * eps, cx, cy, ncx, ncy, order, start, acc, minr2, coll)


@njit(parallel=True, cache=True)
def pair_power_rows(pos, gamma, rows, mins):
    """rows[i] = sum_{j>i} |x_i - x_j|^-gamma; mins[i] = min_{j>i} |x_i - x_j|^2."""
    n = pos.shape[0]
    c = -0.5 * gamma
    for i in prange(n):
        s = 0.0
        mr = np.inf
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            r2 = dx * dx + dy * dy
            if r2 < mr:
                mr = r2
            if r2 > 0.0:
                s += math.exp(c * math.log(r2))
        rows[i] = s
        mins[i] = mr


@njit(parallel=True, cache=True)
def pair_log_rows(pos, rows, mins):
    """rows[i] = sum_{j>i} log|x_i - x_j|; mins[i] = min_{j>i} |x_i - x_j|^2."""
    n = pos.shape[0]
    for i in prange(n):
        s = 0.0
        mr = np.inf
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            r2 = dx * dx + dy * dy
            if r2 < mr:
                mr = r2
            if r2 > 0.0:
                s += 0.5 * math.log(r2)
        rows[i] = s
        mins[i] = mr


def pair_power_sum(pos, gamma):
    """Return (sum_{i<j} |x_i - x_j|^-gamma, min squared distance)."""
    n = pos.shape[0]
    rows, mins = np.zeros(n), np.full(n, np.inf)
    pair_power_rows(np.ascontiguousarray(pos, dtype=np.float64), float(gamma), rows, mins)
    return float(rows.sum()), float(mins.min())


def pair_log_sum(pos):
    """Return (sum_{i<j} log|x_i - x_j|, min squared distance)."""
    n = pos.shape[0]
    rows, mins = np.zeros(n), np.full(n, np.inf)
    pair_log_rows(np.ascontiguousarray(pos, dtype=np.float64), rows, mins)
    return float(rows.sum()), float(mins.min())

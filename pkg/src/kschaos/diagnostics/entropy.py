"""Entropy and Fisher information.

Sign convention: H(f) = int f log f, the Boltzmann entropy as used for the
Keller-Segel entropy balance.  It is the NEGATIVE of the differential entropy,
so a spreading density has decreasing H.
"""

import math

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from ..errors import DuplicatePointsError
from ._inputs import as_points

FISHER_FLOOR = 1e-14


def entropy_grid(f):
    """h^2 sum f log f over cells with f > 0."""
    v = f.values
    pos = v > 0
    return float(f.h**2 * np.sum(v[pos] * np.log(v[pos])))


def entropy_knn(samples, k=4):
    """Kozachenko-Leonenko estimate of int f log f from i.i.d. planar samples.

    Differential entropy is psi(N) - psi(k) + log(pi) + (2/N) sum log r_k(i),
    r_k(i) being the distance from point i to its k-th nearest neighbour;
    the returned value is its negative.
    """
    x = as_points(samples)
    n = x.shape[0]
    if k < 1 or n < k + 1:
        raise ValueError(f"need N >= k + 1 samples (N={n}, k={k})")
    d, _ = cKDTree(x).query(x, k=k + 1)
    if np.any(d[:, 1] == 0.0):
        raise DuplicatePointsError("k-NN entropy needs distinct sample points")
    h_diff = digamma(n) - digamma(k) + math.log(math.pi) + 2.0 * np.mean(np.log(d[:, k]))
    return float(-h_diff)


def fisher_grid(f, floor=FISHER_FLOOR):
    """h^2 sum |grad f|^2 / f with centered differences, cells with f <= floor skipped.

    Values outside the grid count as zero.
    """
    v = np.pad(f.values, 1)
    h = f.h
    gx = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * h)
    gy = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * h)
    c = v[1:-1, 1:-1]
    keep = c > floor
    return float(h * h * np.sum((gx[keep] ** 2 + gy[keep] ** 2) / c[keep]))

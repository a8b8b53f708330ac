"""Counter-based random streams.

Every Gaussian increment is a pure function of ``(seed, step, stream)``: the
Philox counter is positioned at ``[0, step, 0, 0]`` and stream ``m`` consumes
raw words ``2m`` and ``2m+1`` of that block.  Nothing depends on how many
other streams were drawn, so permuting particles together with their stream
ids permutes the noise exactly.
"""

import numpy as np

_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0

# second key word separates independent uses of one user seed
NOISE_DOMAIN = 0
INITIAL_DOMAIN = 1
REFERENCE_DOMAIN = 2
BASELINE_DOMAIN = 3
SUBSAMPLE_DOMAIN = 4


def _key(seed, domain):
    return np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, int(domain) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)


def generator(seed, domain, counter=0):
    """numpy Generator on a Philox stream keyed by (seed, domain)."""
    return np.random.Generator(np.random.Philox(key=_key(seed, domain), counter=[0, counter, 0, 0]))


def raw_to_normals(raw):
    """Box-Muller on pairs of 64-bit words -> array of shape (n, 2)."""
    raw = raw.reshape(-1, 2)
    u1 = ((raw[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53  # (0, 1]
    u2 = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * _INV_2_53
    r = np.sqrt(-2.0 * np.log(u1))
    t = _TWO_PI * u2
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=1)


class CounterNormals:
    """Standard 2D normal draws keyed by (seed, step, stream id)."""

    def __init__(self, seed, domain=NOISE_DOMAIN):
        self.seed = int(seed)
        self.domain = int(domain)
        self._key = _key(seed, domain)

    def normals(self, step, n, ids=None):
        if ids is None:
            m = n
        else:
            ids = np.asarray(ids, dtype=np.int64)
            m = int(ids.max()) + 1
        bg = np.random.Philox(key=self._key, counter=[0, int(step), 0, 0])
        z = raw_to_normals(bg.random_raw(2 * m))
        return z if ids is None else z[ids]


class ZeroNoise:
    """Noise stub that returns zeros (turns the Euler-Maruyama step into plain Euler)."""

    def normals(self, step, n, ids=None):
        return np.zeros((n, 2))

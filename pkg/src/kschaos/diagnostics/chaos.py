"""Distance between particle clouds and the mean-field density, as N grows.

For every (N, seed) the particle system is run to time t and its empirical
measure is compared in W1 with an N-point reference sample drawn from the
solved density f_t.  A second, independent N-sample from f_t measured against
the same reference gives the same-law baseline, i.e. the W1 floor an exactly
chaotic cloud would show at that N.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..meanfield.grid import sample_density
from ..particles import simulate
from ..rng import BASELINE_DOMAIN, REFERENCE_DOMAIN, generator
from .entropy import entropy_knn
from .wasserstein import wasserstein1


@dataclass(frozen=True)
class ChaosRun:
    n: int
    seed: int
    w1: float
    w1_baseline: float
    min_dist: float
    entropy_knn: float  # marginal entropy of the cloud, compare with entropy_grid(f_t)


@dataclass(frozen=True)
class ChaosAggregate:
    n: int
    n_seeds: int
    w1_mean: float
    w1_stderr: float
    baseline_mean: float
    baseline_stderr: float


def _mean_se(x):
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        return float(x.mean()), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


@dataclass(frozen=True)
class ChaosTable:
    t: float
    runs: tuple
    aggregates: tuple

    def aggregate(self, n):
        for a in self.aggregates:
            if a.n == n:
                return a
        raise KeyError(n)

    def strictly_decreasing(self):
        m = [a.w1_mean for a in self.aggregates]
        return all(b < a for a, b in zip(m, m[1:]))

    def within_baseline(self, n, k=2.0):
        """|mean W1 - baseline mean| <= k combined standard errors."""
        a = self.aggregate(n)
        se = math.hypot(a.w1_stderr, a.baseline_stderr)
        return abs(a.w1_mean - a.baseline_mean) <= k * se


def reference_sample(f_t, n, seed):
    return sample_density(f_t, n, generator(seed, REFERENCE_DOMAIN, counter=n))


def baseline_sample(f_t, n, seed):
    return sample_density(f_t, n, generator(seed, BASELINE_DOMAIN, counter=n))


def chaos_run(f_t, cfg, k=4):
    """One table row for a fully specified SimConfig ending at f_t.time."""
    traj = simulate(cfg)
    cloud = traj.final.positions
    n = cfg.n_particles
    ref = reference_sample(f_t, n, cfg.seed)
    base = baseline_sample(f_t, n, cfg.seed)
    return ChaosRun(
        n=n,
        seed=cfg.seed,
        w1=wasserstein1(cloud, ref),
        w1_baseline=wasserstein1(base, ref),
        min_dist=float(np.min(traj.interval_min_dist)),
        entropy_knn=entropy_knn(cloud, k),
    )


def _task(args):
    return chaos_run(*args)


def chaos_convergence_table(pde, sim_cfg, n_list, seeds, t, jobs=1):
    """W1(mu^N_t, f_t) per (N, seed) plus mean/stderr per N.

    ``pde`` is a solved run holding a frame at time t; ``sim_cfg`` is the
    template whose n_particles, seed and t_end are overridden per row.
    """
    f_t = pde.at(t) if hasattr(pde, "at") else pde
    n_list = sorted(set(int(n) for n in n_list))
    seeds = sorted(set(int(s) for s in seeds))
    if not n_list or not seeds:
        raise ValueError("need at least one N and one seed")
    tasks = [(f_t, cfg) for cfg in chaos_configs(sim_cfg, n_list, seeds, t)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            runs = list(ex.map(_task, tasks))
    else:
        runs = [_task(a) for a in tasks]
    return tabulate(t, runs)


def chaos_configs(sim_cfg, n_list, seeds, t):
    stride = max(1, int(round(t / sim_cfg.dt)))
    return [sim_cfg.replace(n_particles=n, seed=s, t_end=t, record_stride=stride) for n in n_list for s in seeds]


def tabulate(t, runs):
    """Sort runs by (N, seed) and add the per-N aggregates."""
    runs = sorted(runs, key=lambda r: (r.n, r.seed))
    aggs = []
    for n in sorted(set(r.n for r in runs)):
        rows = [r for r in runs if r.n == n]
        m, se = _mean_se([r.w1 for r in rows])
        bm, bse = _mean_se([r.w1_baseline for r in rows])
        aggs.append(ChaosAggregate(n, len(rows), m, se, bm, bse))
    return ChaosTable(float(t), tuple(runs), tuple(aggs))


CHAOS_COLUMNS = ("row", "n", "seed", "n_seeds", "w1", "w1_stderr", "w1_baseline", "baseline_stderr", "min_dist", "entropy_knn")


def chaos_rows(table):
    for r in table.runs:
        yield ["run", r.n, r.seed, None, r.w1, None, r.w1_baseline, None, r.min_dist, r.entropy_knn]
    for a in table.aggregates:
        yield ["mean", a.n, None, a.n_seeds, a.w1_mean, a.w1_stderr, a.baseline_mean, a.baseline_stderr, None, None]

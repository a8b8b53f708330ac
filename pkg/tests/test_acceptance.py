"""The eleven numbered acceptance criteria, each at its stated tolerance.

Every test prints one ``criterion N PASS/FAIL`` line (also repeated in the
terminal summary) before asserting, so a failure still reports its numbers.
"""

import itertools
import math

import numpy as np
import pytest

from conftest import HEAT_STD, HEAT_T, gaussian_entropy
from kschaos.diagnostics import (
    chaos_convergence_table,
    entropy_balance_residual,
    entropy_grid,
    entropy_knn,
    fisher_grid,
    moment,
    wasserstein1,
)
from kschaos.harness.runner import coupling_result
from kschaos.kernel import KernelParams, div_K, div_K_reg, eval_K, eval_K_reg, eval_potential, lipschitz_rhs
from kschaos.meanfield import GridSpec, PdeConfig, pde_solve
from kschaos.meanfield.grid import gaussian_cell_averages, normalized
from kschaos.particles import InitialCondition, SimConfig, simulate

ALPHAS = (0.1, 0.5, 0.9)


def random_points(rng, n, rmin=0.1, rmax=10.0):
    r = np.exp(rng.uniform(math.log(rmin), math.log(rmax), n))
    th = rng.uniform(0, 2 * math.pi, n)
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=1)


# ---- 1 ------------------------------------------------------------------------


@pytest.mark.acceptance(1)
def test_c01_kernel_identities(criterion):
    rng = np.random.default_rng(1)
    worst_grad = worst_div = worst_mag = 0.0
    for a in ALPHAS:
        p = KernelParams(a)
        x = random_points(rng, 1000)
        r = np.hypot(x[:, 0], x[:, 1])
        h = (1e-4 * r)[:, None]
        ex, ey = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        grad = np.stack(
            [
                (eval_potential(x + h * ex, p) - eval_potential(x - h * ex, p)) / (2 * h[:, 0]),
                (eval_potential(x + h * ey, p) - eval_potential(x - h * ey, p)) / (2 * h[:, 0]),
            ],
            axis=1,
        )
        K = eval_K(x, p)
        worst_grad = max(worst_grad, np.max(np.hypot(*(K + grad).T) / np.hypot(*K.T)))
        div_fd = (eval_K(x + h * ex, p)[:, 0] - eval_K(x - h * ex, p)[:, 0]) / (2 * h[:, 0]) + (
            eval_K(x + h * ey, p)[:, 1] - eval_K(x - h * ey, p)[:, 1]
        ) / (2 * h[:, 0])
        d = div_K(x, p)
        assert np.allclose(d, (1 - a) * r ** (-a - 1), rtol=1e-13)
        worst_div = max(worst_div, np.max(np.abs(div_fd - d) / np.abs(d)))
        worst_mag = max(worst_mag, np.max(np.abs(np.hypot(*K.T) / r**-a - 1)))
    ok = worst_grad < 1e-6 and worst_div < 1e-6 and worst_mag < 1e-12
    criterion(1, "kernel identities", ok, f"grad {worst_grad:.2e} div {worst_div:.2e} |K| {worst_mag:.2e}")
    assert ok


# ---- 2 ------------------------------------------------------------------------


@pytest.mark.acceptance(2)
def test_c02_lipschitz_bound(criterion):
    rng = np.random.default_rng(2)
    violations, tightest = 0, 0.0
    for a in ALPHAS:
        p = KernelParams(a)
        x = random_points(rng, 100_000, 1e-3, 1e3)
        # half the pairs close together, where the bound is tightest
        y = np.where(
            (np.arange(100_000) % 2 == 0)[:, None],
            random_points(rng, 100_000, 1e-3, 1e3),
            x * (1 + rng.normal(0, 0.05, (100_000, 1))) + rng.normal(0, 1e-3, (100_000, 2)),
        )
        lhs = np.hypot(*(eval_K(x, p) - eval_K(y, p)).T)
        rhs = lipschitz_rhs(x, y, p)
        violations += int(np.sum(lhs > rhs))
        tightest = max(tightest, float(np.max(lhs / rhs)))
    ok = violations == 0
    criterion(2, "Lipschitz-type bound", ok, f"violations {violations} of 3e5, max lhs/rhs {tightest:.3f}")
    assert ok


# ---- 3 ------------------------------------------------------------------------


@pytest.mark.acceptance(3)
def test_c03_regularized_kernel(criterion):
    rng = np.random.default_rng(3)
    mismatched, div_viol = 0, 0
    for a in ALPHAS:
        for eps in (1e-1, 1e-3):
            p = KernelParams(a, eps=eps)
            outside = np.vstack([[eps, 0.0], [0.0, -eps], random_points(rng, 10_000, eps, 100 * eps)])
            outside = outside[np.hypot(*outside.T) >= eps]
            mismatched += int(np.sum(np.any(eval_K_reg(outside, p) != eval_K(outside, p), axis=1)))
            pts = random_points(rng, 10_000, eps / 100, 100 * eps)
            div_viol += int(np.sum(div_K_reg(pts, p) > 2 * np.hypot(*pts.T) ** (-a - 1)))
    ok = mismatched == 0 and div_viol == 0
    criterion(3, "regularized kernel", ok, f"mismatches outside eps {mismatched}, divergence violations {div_viol}")
    assert ok


# ---- 4 ------------------------------------------------------------------------


@pytest.mark.acceptance(4)
def test_c04_free_diffusion(criterion, heat_run):
    f = heat_run.at(HEAT_T)
    exact = gaussian_cell_averages(f.grid, (0, 0), math.sqrt(HEAT_STD**2 + 2 * HEAT_T))
    l1 = f.h**2 * float(np.abs(f.values - exact).sum())

    T = 0.5
    cfg = SimConfig(4096, KernelParams(0.5, 0.0), 1e-3, T, seed=4, initial=InitialCondition.gaussian((0, 0), 1.0))
    pos = simulate(cfg).final.positions
    var = pos.var(axis=0, ddof=1)
    var_err = float(np.max(np.abs(var / (1 + 2 * T) - 1)))

    h0 = entropy_grid(heat_run[0])
    rel_db = entropy_balance_residual(heat_run, KernelParams(0.5, 0.0), HEAT_T) / abs(h0)

    ok = l1 < 1e-3 and var_err < 0.10 and rel_db < 0.01
    criterion(4, "chi = 0 reductions", ok, f"(a) L1 {l1:.2e} (b) var rel err {var_err:.3f} (c) de Bruijn {rel_db:.2e}")
    assert ok


# ---- 5 ------------------------------------------------------------------------


@pytest.mark.acceptance(5)
def test_c05_exact_regularized_coupling(criterion):
    base = SimConfig(64, KernelParams(0.5, 1.0), 1e-4, 0.5)
    rows = [coupling_result(base.replace(seed=s), 1e-3) for s in range(4)]
    ok = all(r["coupled"] and r["records_compared"] > 0 for r in rows)
    detail = "; ".join(
        f"seed {r['seed']}: {r['records_identical']}/{r['records_compared']} identical, "
        f"crossing {r['first_crossing'] if r['first_crossing'] is not None else 'none'}"
        for r in rows
    )
    criterion(5, "exact/regularized coupling", ok, detail)
    assert ok


# ---- 6 ------------------------------------------------------------------------


@pytest.mark.acceptance(6)
def test_c06_no_collisions(criterion):
    base = SimConfig(64, KernelParams(0.5, 1.0), 1e-4, 1.0, taming=1.0)
    minima = np.array([simulate(base.replace(seed=s)).min_distance for s in range(16)])
    collided = int(np.sum(minima < 1e-6))
    q = np.quantile(minima, [0.0, 0.25, 0.5, 0.75, 1.0])
    ok = collided == 0
    criterion(
        6, "no collisions", ok, f"runs below 1e-6: {collided}/16; run-min quantiles " + " ".join(f"{v:.2e}" for v in q)
    )
    assert ok


# ---- 7 ------------------------------------------------------------------------


@pytest.mark.acceptance(7)
def test_c07_entropy_balance(criterion, balance_runs):
    p = KernelParams(0.5, 1.0)
    res = {n: entropy_balance_residual(sol, p, 0.5) for n, sol in balance_runs.items()}
    h0 = abs(entropy_grid(balance_runs[256][0]))
    rel = res[256] / h0
    shrink = res[128] / res[256]
    ok = rel < 0.05 and shrink >= 1.5
    criterion(7, "entropy balance", ok, f"256^2 residual {rel:.2%} of |H0|, 128->256 shrink {shrink:.2f}x")
    assert ok


# ---- 8, 9 ------------------------------------------------------------------------

CHAOS_N = (128, 512, 2048)


@pytest.fixture(scope="module")
def chaos():
    ref_cfg = PdeConfig(KernelParams(0.5, 1.0), GridSpec.square(256, 6.0), 2e-4, 0.5, InitialCondition.gaussian())
    ref = pde_solve(ref_cfg.replace(record_stride=10**6))
    sim = SimConfig(128, KernelParams(0.5, 1.0), 1e-3, 0.5)
    return ref.at(0.5), chaos_convergence_table(ref, sim, CHAOS_N, range(8), 0.5)


@pytest.mark.acceptance(8)
def test_c08_propagation_of_chaos(criterion, chaos):
    _, tab = chaos
    dec = tab.strictly_decreasing()
    near = tab.within_baseline(2048)
    ok = dec and near
    agg = " ".join(
        f"N={a.n}: {a.w1_mean:.4f}+-{a.w1_stderr:.4f} (iid {a.baseline_mean:.4f})" for a in tab.aggregates
    )
    criterion(8, "propagation of chaos", ok, f"decreasing {dec}, N=2048 within 2 stderr {near}; {agg}")
    assert ok


@pytest.mark.acceptance(9)
def test_c09_entropic_chaos_proxy(criterion, chaos):
    f_t, tab = chaos
    hg = entropy_grid(f_t)
    devs = [abs(r.entropy_knn - hg) / abs(hg) for r in tab.runs if r.n == 2048]
    ok = len(devs) == 8 and max(devs) < 0.10
    criterion(9, "entropic chaos proxy", ok, f"grid H {hg:.4f}, worst k-NN deviation {max(devs):.2%} over 8 seeds")
    assert ok


# ---- 10 --------------------------------------------------------------------------


def _brute_w1(a, b):
    return min(sum(math.dist(a[i], b[j]) for i, j in enumerate(pm)) for pm in itertools.permutations(range(len(a)))) / len(a)


@pytest.mark.acceptance(10)
def test_c10_estimator_oracles(criterion):
    rng = np.random.default_rng(10)
    h_true = gaussian_entropy(1.0)
    knn_err = abs(entropy_knn(rng.standard_normal((10_000, 2))) - h_true)
    g = GridSpec.square(256, 6.0)

    def gauss(s):
        return normalized(g, gaussian_cell_averages(g, (0, 0), math.sqrt(s)))

    grid_err = abs(entropy_grid(gauss(1.0)) - h_true)
    fisher_err = max(abs(fisher_grid(gauss(s)) * s / 2 - 1) for s in (0.5, 1.0, 2.0))
    m1_err = abs(moment(rng.standard_normal((10_000, 2)), 1) - math.sqrt(math.pi / 2))

    w1_ok = True
    for n in range(1, 9):
        for _ in range(3):
            a, b, c = rng.normal(size=(3, n, 2))
            ab = wasserstein1(a, b)
            w1_ok &= abs(ab - _brute_w1(a, b)) <= 1e-12 * max(1.0, ab)
            w1_ok &= abs(ab - wasserstein1(b, a)) <= 1e-12
            w1_ok &= ab <= wasserstein1(a, c) + wasserstein1(c, b) + 1e-12
            w1_ok &= wasserstein1(a, a[rng.permutation(n)]) == 0.0
            w1_ok &= ab >= abs(moment(a, 1) - moment(b, 1)) - 1e-12
    ok = knn_err < 0.05 and grid_err < 0.002 and fisher_err < 0.01 and m1_err < 0.03 and w1_ok
    criterion(
        10,
        "estimator oracles",
        ok,
        f"kNN {knn_err:.4f} grid H {grid_err:.5f} Fisher {fisher_err:.2%} M1 {m1_err:.4f} W1 axioms/brute {w1_ok}",
    )
    assert ok


# ---- 11 --------------------------------------------------------------------------


@pytest.mark.acceptance(11)
def test_c11_w1_stability(criterion):
    g = GridSpec.square(44, 5.5)
    p = KernelParams(0.5, 1.0)
    runs = [
        pde_solve(PdeConfig(p, g, 2e-3, 0.5, InitialCondition.gaussian(m, 1.0), record_stride=25))
        for m in ((0.0, 0.0), (0.1, 0.0))
    ]
    w = np.array([wasserstein1(f, h) for f, h in zip(*runs)])
    ratio = float(np.max(w / w[0]))
    ok = ratio <= 3.0 and len(w) == 11
    criterion(11, "W1 stability", ok, f"W1(0) {w[0]:.4f}, max W1(t)/W1(0) {ratio:.3f} over t <= 0.5")
    assert ok

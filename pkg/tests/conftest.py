"""Shared fixtures; the expensive runs are solved once per session."""

import math
import os

# bit-exact reductions for the coupling checks; must precede the first numba import
os.environ.setdefault("KS_DETERMINISTIC", "1")

import pytest  # noqa: E402

from kschaos.kernel import KernelParams  # noqa: E402
from kschaos.meanfield import GridSpec, PdeConfig, pde_solve  # noqa: E402
from kschaos.particles import InitialCondition  # noqa: E402

HEAT_N = 256
HEAT_HALF_WIDTH = 4.0
HEAT_STD = 0.5
HEAT_T = 0.25


def heat_config(n=HEAT_N, stride=16):
    g = GridSpec.square(n, HEAT_HALF_WIDTH)
    return PdeConfig(
        KernelParams(0.5, 0.0),
        g,
        dt=g.h**2 / 8,
        t_end=HEAT_T,
        initial=InitialCondition.gaussian((0, 0), HEAT_STD),
        record_stride=stride,
    )


@pytest.fixture(scope="session")
def heat_run():
    """chi = 0 solve from N(0, 0.25 I) to t = 0.25 on a 256^2 grid of half-width 4."""
    return pde_solve(heat_config())


def balance_config(n, dt, frame_dt=0.005):
    cfg = PdeConfig(KernelParams(0.5, 1.0), GridSpec.square(n, 6.0), dt, 0.5, InitialCondition.gaussian((0, 0), 1.0))
    return cfg.replace(record_stride=max(1, int(round(frame_dt / cfg.step))))


BALANCE_RUNS = {128: 8e-4, 256: 2e-4}


@pytest.fixture(scope="session")
def balance_runs():
    """alpha = 0.5, chi = 1 solves from N(0, I) to t = 0.5 at two resolutions."""
    return {n: pde_solve(balance_config(n, dt)) for n, dt in BALANCE_RUNS.items()}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(num): one of the numbered acceptance criteria")
    config._ks_criteria = {}


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion (printed in the summary)."""
    store = request.config._ks_criteria

    def report(num, title, ok, detail=""):
        store[num] = (bool(ok), title, detail)
        print(f"criterion {num:>2} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = getattr(config, "_ks_criteria", {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(store):
        ok, title, detail = store[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {title}  {detail}")
    n_ok = sum(v[0] for v in store.values())
    terminalreporter.write_line(f"{n_ok}/{len(store)} criteria passed")


def gaussian_entropy(s):
    return -1.0 - math.log(2 * math.pi * s)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kschaos.errors import InvalidParamsError, SingularInputError
from kschaos.kernel import (
    KernelParams,
    div_K,
    div_K_reg,
    eval_K,
    eval_K_reg,
    eval_potential,
    lipschitz_rhs,
    radial_power_cell_average,
)

P = KernelParams(0.5)

# reference values computed with mpmath at 30 digits
K_0_2 = 0.707106781186547524400844362105
KREG_01 = 1.11803398874989484820458683437
DIV_2 = 0.176776695296636881100211090526
DIVREG_005 = 63.2455532033675866399778708887
LIP_EXAMPLE = 14.1421356237309504880168872421
CELL_AVG_15 = 9.40051758278055099033850516369


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_params_reject_alpha_outside_open_interval(alpha):
    with pytest.raises(InvalidParamsError, match="sub-critical"):
        KernelParams(alpha)


def test_params_reject_negative_chi_and_eps():
    with pytest.raises(InvalidParamsError):
        KernelParams(0.5, chi=-1.0)
    with pytest.raises(InvalidParamsError):
        KernelParams(0.5, eps=-1e-3)


def test_eval_K_examples():
    np.testing.assert_array_equal(eval_K((1.0, 0.0), P), [1.0, 0.0])
    v = eval_K((0.0, 2.0), P)
    assert v[0] == 0.0
    assert v[1] == pytest.approx(K_0_2, rel=1e-15)


def test_eval_K_singular():
    for a in (0.1, 0.5, 0.9):
        with pytest.raises(SingularInputError):
            eval_K((0.0, 0.0), KernelParams(a))


def test_eval_K_reg_examples():
    p = KernelParams(0.5, eps=0.2)
    v = eval_K_reg((0.1, 0.0), p)
    assert v[0] == pytest.approx(KREG_01, rel=1e-15) and v[1] == 0.0
    np.testing.assert_array_equal(eval_K_reg((1.0, 0.0), p), [1.0, 0.0])
    np.testing.assert_array_equal(eval_K_reg((0.0, 0.0), p), [0.0, 0.0])


def test_regularized_functions_need_eps():
    with pytest.raises(InvalidParamsError):
        eval_K_reg((1.0, 0.0), P)
    with pytest.raises(InvalidParamsError):
        div_K_reg((1.0, 0.0), P)


def test_potential_examples():
    assert eval_potential((1.0, 0.0), P) == pytest.approx(-2.0, rel=1e-15)
    assert eval_potential((0.0, 4.0), P) == pytest.approx(-4.0, rel=1e-15)
    with pytest.raises(SingularInputError):
        eval_potential((0.0, 0.0), P)


def _fd_grad_phi(x, p, h):
    g = np.zeros(2)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        g[k] = (eval_potential(x + e, p) - eval_potential(x - e, p)) / (2 * h)
    return g


def test_gradient_identity_at_fixed_point():
    x = np.array([0.7, -1.3])
    h = 1e-6 * np.linalg.norm(x)
    np.testing.assert_allclose(-_fd_grad_phi(x, P, h), eval_K(x, P), rtol=1e-6)


def test_div_K_examples():
    assert div_K((1.0, 0.0), P) == pytest.approx(0.5, rel=1e-15)
    assert div_K((2.0, 0.0), P) == pytest.approx(DIV_2, rel=1e-15)
    with pytest.raises(SingularInputError):
        div_K((0.0, 0.0), P)


def _fd_div(x, p, h):
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    return (eval_K(x + ex, p)[0] - eval_K(x - ex, p)[0] + eval_K(x + ey, p)[1] - eval_K(x - ey, p)[1]) / (2 * h)


def test_div_K_matches_finite_difference():
    x = np.array([1.1, -0.4])
    assert _fd_div(x, P, 1e-6 * np.linalg.norm(x)) == pytest.approx(float(div_K(x, P)), rel=1e-6)


def test_div_K_reg_examples():
    p = KernelParams(0.5, eps=0.1)
    assert div_K_reg((0.05, 0.0), p) == pytest.approx(DIVREG_005, rel=1e-14)
    assert div_K_reg((1.0, 0.0), p) == pytest.approx(0.5, rel=1e-15)


def test_div_K_reg_bound_on_random_points():
    rng = np.random.default_rng(3)
    r = 10 ** rng.uniform(-3, 1, 10_000)
    th = rng.uniform(0, 2 * np.pi, r.size)
    x = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    for eps in (1e-3, 1e-1):
        for a in (0.1, 0.5, 0.9):
            p = KernelParams(a, eps=eps)
            assert np.all(div_K_reg(x, p) <= 2.0 * np.hypot(x[:, 0], x[:, 1]) ** (-a - 1))


def test_lipschitz_examples():
    assert lipschitz_rhs((1.0, 0.0), (1.0, 0.0), P) == 0.0
    assert lipschitz_rhs((1.0, 0.0), (0.0, 1.0), P) == pytest.approx(LIP_EXAMPLE, rel=1e-15)
    with pytest.raises(SingularInputError):
        lipschitz_rhs((0.0, 0.0), (1.0, 0.0), P)


def test_cell_average_of_inverse_power():
    assert radial_power_cell_average(1.5, 1.0) == pytest.approx(CELL_AVG_15, rel=1e-12)
    # scaling: the mean of |z|^-gamma over a square of side h goes like h^-gamma
    assert radial_power_cell_average(1.5, 0.25) == pytest.approx(CELL_AVG_15 * 0.25**-1.5, rel=1e-12)
    assert radial_power_cell_average(0.0, 0.3) == pytest.approx(1.0, rel=1e-12)


def test_vectorized_shapes():
    x = np.random.default_rng(0).normal(size=(3, 4, 2))
    assert eval_K(x, P).shape == (3, 4, 2)
    assert div_K(x, P).shape == (3, 4)


# |x|^2 must not underflow to 0, which is (deliberately) reported as singular
coord = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False).filter(lambda v: v == 0 or abs(v) > 1e-150)
alphas = st.sampled_from([0.1, 0.5, 0.9])


@settings(max_examples=300, deadline=None)
@given(coord, coord, alphas)
def test_antisymmetry(x, y, a):
    if x == 0 and y == 0:
        return
    p = KernelParams(a)
    v = np.array([x, y])
    np.testing.assert_array_equal(eval_K(-v, p), -eval_K(v, p))


@settings(max_examples=300, deadline=None)
@given(st.floats(-6, 6), st.floats(0, 2 * math.pi), alphas)
def test_magnitude_law(logr, th, a):
    r = 10.0**logr
    v = np.array([r * math.cos(th), r * math.sin(th)])
    rr = math.hypot(*v)
    assert np.linalg.norm(eval_K(v, KernelParams(a))) == pytest.approx(rr**-a, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(coord, coord, alphas, st.sampled_from([1e-4, 1e-2, 1.0]))
def test_regularized_equals_exact_outside_cutoff(x, y, a, eps):
    v = np.array([x, y])
    if x * x + y * y < eps * eps:
        return
    np.testing.assert_array_equal(eval_K_reg(v, KernelParams(a, eps=eps)), eval_K(v, KernelParams(a)))


def test_cutoff_boundary_uses_outer_branch():
    p = KernelParams(0.5, eps=0.5)
    x = np.array([0.5, 0.0])
    np.testing.assert_array_equal(eval_K_reg(x, p), eval_K(x, KernelParams(0.5)))
    assert div_K_reg(x, p) == div_K(x, KernelParams(0.5))


@settings(max_examples=500, deadline=None)
@given(coord, coord, coord, coord, alphas)
def test_lipschitz_bound_property(x1, y1, x2, y2, a):
    x, y = np.array([x1, y1]), np.array([x2, y2])
    if not x.any() or not y.any():
        return
    p = KernelParams(a)
    lhs = np.linalg.norm(eval_K(x, p) - eval_K(y, p))
    assert lhs <= lipschitz_rhs(x, y, p) * (1 + 1e-12)

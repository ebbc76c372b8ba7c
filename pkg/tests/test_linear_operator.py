import math
import warnings

import numpy as np
import pytest

from dirac_soliton.errors import ConvergenceError, TruncationWarning
from dirac_soliton.ground_state import solve_ground_state
from dirac_soliton.linear_operator import (
    FieldPair,
    LinearizedOp,
    apply_L,
    hardy_check,
    hardy_fields,
    hardy_suite,
    invert_L,
    invert_Ltilde,
    smallest_singular_value,
    yukawa_convolve,
    yukawa_kernel,
)
from dirac_soliton.radial_core import L4, RadialField, integrate_radial, make_grid


def gaussian_pair(grid, a=1.0, b=0.5, c=0.3):
    """Smooth decaying pair: e1 even, e2 odd about the origin, with the
    analytic derivatives needed to form L e by hand."""
    r = grid.nodes
    g = np.exp(-a * r * r)
    e1 = (b + r * r) * g
    de1 = (2 * r - 2 * a * r * (b + r * r)) * g
    e2 = c * r * g
    de2 = c * (1 - 2 * a * r * r) * g
    return e1, de1, e2, de2


def analytic_L(op, grid, **kw):
    e1, de1, e2, de2 = gaussian_pair(grid, **kw)
    r = grid.nodes
    V = op.potential
    phi1 = (1 - V) * e1 + de2 + 2 * e2 / r
    phi2 = de1 + e2
    return FieldPair.from_arrays(grid, e1, e2), FieldPair.from_arrays(grid, phi1, phi2)


def rel_sup(a: FieldPair, b: FieldPair) -> float:
    return (a - b).sup() / b.sup()


# apply_L --------------------------------------------------------------------


def test_apply_zero(op1):
    assert apply_L(op1, FieldPair.zeros(op1.grid)).sup() == 0.0


def test_apply_second_component_only(op1):
    grid = op1.grid
    r = grid.nodes
    e2 = np.exp(-r * r)
    out = apply_L(op1, FieldPair.from_arrays(grid, np.zeros_like(r), e2))
    expected = -2 * r * e2 + 2 * e2 / r
    # e^{-r^2} is even, so the odd stencil is inexact at the first nodes only
    np.testing.assert_allclose(out.first.values[10:], expected[10:], atol=1e-8)
    np.testing.assert_allclose(out.second.values, e2, atol=1e-14)


def test_apply_to_ground_state_pair(op1, gs1):
    grid = op1.grid
    Q, dQ = gs1.Q.values, gs1.Qprime.values
    out = apply_L(op1, FieldPair.from_arrays(grid, Q, -dQ))
    expected = -2.0 * gs1.theta * Q ** (2 * gs1.theta + 1)
    assert np.max(np.abs(out.first.values - expected)[:-2]) < 1e-6 * np.max(np.abs(expected))


def test_apply_matches_analytic(op1):
    e, phi = analytic_L(op1, op1.grid)
    assert rel_sup(apply_L(op1, e), phi) < 1e-8


# Yukawa convolution and the free operator -----------------------------------


def test_kernel_normalization_graded():
    grid = make_grid(40.0, 4000, "graded")
    assert integrate_radial(yukawa_kernel(grid)) == pytest.approx(1.0, abs=1e-6)


def test_convolve_constant_on_large_grid():
    grid = make_grid(60.0, 6000)
    with pytest.warns(TruncationWarning):
        out = yukawa_convolve(RadialField.from_function(grid, lambda r: 1.0 + 0 * r))
    inner = grid.nodes <= 20.0
    np.testing.assert_allclose(out.values[inner], 1.0, atol=1e-6)


def test_convolve_recovers_gaussian(grid20):
    r = grid20.nodes
    # (-Laplacian + 1) e^{-r^2} = (7 - 4 r^2) e^{-r^2}
    phi = RadialField(grid20, (7 - 4 * r * r) * np.exp(-r * r))
    out = yukawa_convolve(phi)
    assert np.max(np.abs(out.values - np.exp(-r * r))) < 1e-6


def test_convolve_zero(grid20):
    assert yukawa_convolve(RadialField.zeros(grid20)).sup() == 0.0


def test_free_inverse_with_first_component_only(grid20):
    r = grid20.nodes
    g = np.exp(-r * r)
    phi = FieldPair.from_arrays(grid20, (7 - 4 * r * r) * g, np.zeros_like(r))
    e = invert_Ltilde(phi)
    assert np.max(np.abs(e.first.values - g)) < 1e-6
    assert np.max(np.abs(e.second.values - 2 * r * g)) < 1e-6


def test_free_inverse_round_trip(grid20):
    r = grid20.nodes
    e1, de1, e2, de2 = gaussian_pair(grid20)
    phi = FieldPair.from_arrays(grid20, e1 + de2 + 2 * e2 / r, de1 + e2)
    out = invert_Ltilde(phi)
    assert rel_sup(out, FieldPair.from_arrays(grid20, e1, e2)) < 1e-5


def test_free_inverse_zero(grid20):
    assert invert_Ltilde(FieldPair.zeros(grid20)).sup() == 0.0


def test_truncation_warning(grid20):
    with pytest.warns(TruncationWarning):
        yukawa_convolve(RadialField.from_function(grid20, lambda r: np.exp(-0.5 * r)))


# invert_L -------------------------------------------------------------------


@pytest.mark.parametrize("method", ["banded", "green"])
def test_manufactured_solution(op1, method):
    e, phi = analytic_L(op1, op1.grid)
    assert rel_sup(invert_L(op1, phi, method), e) < 1e-5


def test_round_trips(op1):
    e, _ = analytic_L(op1, op1.grid, a=0.7, b=-0.2, c=1.1)
    back = invert_L(op1, apply_L(op1, e))
    assert rel_sup(back, e) < 1e-10
    phi = e
    assert rel_sup(apply_L(op1, invert_L(op1, phi)), phi) < 1e-10


def test_invert_zero(op1):
    for method in ("banded", "green"):
        assert invert_L(op1, FieldPair.zeros(op1.grid), method).sup() == 0.0


def test_green_and_banded_agree_on_random_sources(op1):
    rng = np.random.default_rng(11)
    r = op1.grid.nodes
    for _ in range(3):
        c = rng.standard_normal(6)
        phi = FieldPair.from_arrays(
            op1.grid,
            np.polyval(c[:3], r * r) * np.exp(-rng.uniform(0.3, 2) * r * r),
            r * np.polyval(c[3:], r * r) * np.exp(-rng.uniform(0.3, 2) * r * r),
        )
        a = invert_L(op1, phi, "banded")
        b = invert_L(op1, phi, "green")
        assert rel_sup(b, a) < 1e-4


def test_neumann_weak_coupling_agrees(gs_coarse):
    op = LinearizedOp.from_ground_state(gs_coarse, coupling=0.01)
    e, phi = analytic_L(op, op.grid)
    a = invert_L(op, phi, "banded")
    b = invert_L(op, phi, "neumann")
    c = invert_L(op, phi, "green")
    assert rel_sup(b, a) < 1e-4
    assert rel_sup(c, b) < 1e-4


def test_neumann_diverges_for_ground_state_potential(op_coarse):
    _, phi = analytic_L(op_coarse, op_coarse.grid)
    with pytest.raises(ConvergenceError):
        invert_L(op_coarse, phi, "neumann", max_terms=40)


def test_unknown_method(op_coarse):
    with pytest.raises(ValueError):
        invert_L(op_coarse, FieldPair.zeros(op_coarse.grid), "lsqr")


def test_grid_mismatch(op_coarse, grid20):
    with pytest.raises(ValueError):
        invert_L(op_coarse, FieldPair.zeros(grid20))


def test_singular_value_stable_under_refinement():
    values = []
    for n in (1000, 2000):
        gs = solve_ground_state(1.0, make_grid(20.0, n))
        values.append(smallest_singular_value(LinearizedOp.from_ground_state(gs)))
    assert min(values) > 0.05
    assert values[1] > 0.9 * values[0]


def test_theta_mismatch(gs1):
    with pytest.raises(ValueError):
        LinearizedOp(1.5, gs1)


def test_small_theta_warns(coarse_grid):
    gs = solve_ground_state(0.5, coarse_grid)
    with pytest.warns(RuntimeWarning):
        op = LinearizedOp.from_ground_state(gs)
    e, phi = analytic_L(op, op.grid)
    assert rel_sup(invert_L(op, phi), e) < 1e-5


def test_field_pair_algebra(grid20):
    a = FieldPair.from_arrays(grid20, np.ones(grid20.n), np.zeros(grid20.n))
    b = (a + a.scale(2.0)) - a
    assert b.sup() == 2.0
    assert b.norm(L4) == pytest.approx(2.0 * a.norm(L4))
    with pytest.raises(ValueError):
        FieldPair(RadialField.zeros(grid20), RadialField.zeros(make_grid(20.0, 100)))


# Hardy-type bound -----------------------------------------------------------


def test_hardy_example(grid20):
    lhs, rhs = hardy_check(RadialField.from_function(grid20, lambda r: r * np.exp(-r)), 4.0)
    assert 0 < lhs < math.inf and 0 < rhs < math.inf


def test_hardy_zero(grid20):
    assert hardy_check(RadialField.zeros(grid20), 2.0) == (0.0, 0.0)


def test_hardy_rejects_small_p(grid20):
    with pytest.raises(ValueError):
        hardy_check(RadialField.zeros(grid20), 1.0)


def test_hardy_suite_p2_constant(grid20):
    ratios = hardy_suite(grid20, 50, ps=(2.0,), seed=0)[2.0]
    assert ratios.size == 50
    assert np.all(np.isfinite(ratios))
    assert ratios.max() <= 1.0 + 1e-6


def test_hardy_fields_deterministic(grid20):
    a = hardy_fields(grid20, 3, seed=5)
    b = hardy_fields(grid20, 3, seed=5)
    for x, y in zip(a, b):
        assert np.array_equal(x.values, y.values)
        assert abs(x.values[-1]) < 1e-8


def test_no_warnings_on_decaying_sources(op1):
    _, phi = analytic_L(op1, op1.grid)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        invert_L(op1, phi, "green")

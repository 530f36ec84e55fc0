import numpy as np
import pytest
from numpy.testing import assert_allclose

from packages.core.errors import (
    DomainError,
    HypothesisMismatchError,
    IndefiniteOperatorError,
    PreconditionError,
)
from packages.core.models import HessianClass, TheoremCase
from packages.gl.dual import (
    auto_case,
    build_dual_point,
    eval_Gstar,
    eval_Jstar,
    fenchel_young_gap,
    global_optimality_sample,
    jtilde_gradient,
    membership_A,
    membership_B,
    membership_C,
    midpoint_convexity_sample,
    reduced_J1,
    reduced_J2_global,
    reduced_J2_over_v1,
    reduced_Jtilde,
    stationarity_residuals,
    verify_gap,
    verify_second_derivative_correspondence,
    weak_duality_sample,
)
from packages.gl.grid_ops import Grid, domain_measure, laplacian_extremes
from packages.gl.primal import (
    CriticalPoint,
    GLProblem,
    eval_J,
    find_critical_point,
    initial_guess,
)
from tests.conftest import LOWER_ROOT, MIDDLE_ROOT, UPPER_ROOT

T = TheoremCase


@pytest.fixture
def zero_point(f0_problem) -> CriticalPoint:
    return find_critical_point(f0_problem, np.zeros(15))


@pytest.fixture
def roots(three_node_problem) -> dict[str, CriticalPoint]:
    return {
        name: find_critical_point(three_node_problem, np.full(3, start))
        for name, start in (("upper", UPPER_ROOT), ("lower", LOWER_ROOT), ("middle", MIDDLE_ROOT))
    }


def test_dual_value_at_zero_field(f0_problem):
    half_measure = 0.5 * domain_measure(f0_problem.grid)
    assert eval_Jstar(f0_problem, np.zeros(15), -np.ones(15)) == pytest.approx(half_measure)
    assert eval_J(f0_problem, np.zeros(15)) == pytest.approx(half_measure)


def test_dual_point_of_zero_field(f0_problem, zero_point):
    dp = build_dual_point(f0_problem, zero_point.u0)
    assert_allclose(dp.v0s, -1.0)
    assert_allclose(dp.v1s, 0.0)
    assert dp.in_Astar and dp.in_Bstar
    assert membership_C(f0_problem, dp.v0s) == (True, True)


@pytest.mark.parametrize("case", [T.T1_ITEM1, T.T1_ITEM2, T.T2_CASE1, T.T4_GLOBAL])
def test_zero_field_gap_closes(f0_problem, zero_point, case):
    report = verify_gap(f0_problem, zero_point, case, gap_tol=1e-10)
    assert report.passed
    assert abs(report.gap) <= 1e-10
    assert not report.lower_bound
    assert report.dual_arg_error is not None and report.dual_arg_error <= 1e-8


def test_auto_case_at_zero_field(f0_problem, zero_point):
    assert auto_case(f0_problem, zero_point) == [T.T1_ITEM1, T.T1_ITEM2, T.T2_CASE1, T.T4_GLOBAL]


def test_roots_have_expected_classes(three_node_problem, roots):
    assert roots["upper"].hessian_class is HessianClass.POSITIVE_DEFINITE
    assert roots["lower"].hessian_class is HessianClass.POSITIVE_DEFINITE
    assert roots["middle"].hessian_class is HessianClass.NEGATIVE_DEFINITE
    for name, expected in (("upper", True), ("lower", False), ("middle", False)):
        v0s = build_dual_point(three_node_problem, roots[name].u0).v0s
        assert membership_B(three_node_problem, v0s) is expected


@pytest.mark.parametrize(
    "name, case",
    [("upper", T.T2_CASE1), ("lower", T.T2_CASE2), ("middle", T.T2_CASE3)],
)
def test_reduced_over_v1_gap_closes(three_node_problem, roots, name, case):
    report = verify_gap(three_node_problem, roots[name], case)
    assert report.passed
    assert report.dual_arg_error is not None and report.dual_arg_error <= 1e-8


@pytest.mark.parametrize(
    "name, expected",
    [
        ("upper", [T.T1_ITEM1, T.T1_ITEM2, T.T2_CASE1, T.T4_GLOBAL]),
        ("lower", [T.T1_ITEM1, T.T2_CASE2]),
        ("middle", [T.T1_ITEM3, T.T2_CASE3]),
    ],
)
def test_auto_case_per_root(three_node_problem, roots, name, expected):
    cases = auto_case(three_node_problem, roots[name])
    assert cases == expected
    for case in cases:
        assert verify_gap(three_node_problem, roots[name], case).passed


def test_wrong_case_is_rejected(three_node_problem, roots):
    with pytest.raises(HypothesisMismatchError) as info:
        verify_gap(three_node_problem, roots["upper"], T.T2_CASE3)
    assert info.value.case == "T2_case3"
    with pytest.raises(HypothesisMismatchError):
        verify_gap(three_node_problem, roots["middle"], T.T1_ITEM2)


def test_uncertified_point_is_rejected(f0_problem):
    fake = CriticalPoint(
        u0=np.ones(15),
        residual_norm=0.0,
        hessian_class=HessianClass.POSITIVE_DEFINITE,
        lambda_min=1.0,
        lambda_max=1.0,
    )
    with pytest.raises(PreconditionError):
        verify_gap(f0_problem, fake, T.T1_ITEM1)


def test_dual_stationarity_at_roots(three_node_problem, roots):
    for cp in roots.values():
        dp = build_dual_point(three_node_problem, cp.u0)
        r_v1, r_v0 = stationarity_residuals(three_node_problem, dp)
        assert r_v1 <= 1e-8 and r_v0 <= 1e-8
        assert np.max(np.abs(jtilde_gradient(three_node_problem, dp.v1s))) <= 1e-8


def test_inner_argmax_recovers_dual_point(three_node_problem, roots):
    for cp in roots.values():
        dp = build_dual_point(three_node_problem, cp.u0)
        value, v0_arg = reduced_Jtilde(three_node_problem, dp.v1s)
        assert_allclose(v0_arg, dp.v0s, atol=1e-8)
        assert value == pytest.approx(eval_J(three_node_problem, cp.u0), rel=1e-8)


def test_reduced_functionals_require_definite_operator(three_node_problem, roots):
    middle = build_dual_point(three_node_problem, roots["middle"].u0)
    upper = build_dual_point(three_node_problem, roots["upper"].u0)
    with pytest.raises(IndefiniteOperatorError):
        reduced_J1(three_node_problem, middle.v0s)
    with pytest.raises(IndefiniteOperatorError):
        reduced_J2_over_v1(three_node_problem, upper.v0s)


def test_conjugate_outside_domain(f0_problem):
    with pytest.raises(DomainError) as info:
        eval_Gstar(f0_problem, np.zeros(15), np.full(15, -f0_problem.K))
    assert info.value.margin < 0


def test_membership_A_factor(grid_1d):
    loose = GLProblem.build(grid_1d, 1.0, 1.0, 1.0, a_star_factor=1.0)
    strict = GLProblem.build(grid_1d, 1.0, 1.0, 1.0, a_star_factor=2.0)
    v0s = np.full(15, -0.75 * strict.K)
    assert membership_A(loose, v0s)
    assert not membership_A(strict, v0s)


@pytest.mark.parametrize(
    "name, jtilde, v0_functional, v0_class",
    [
        ("upper", HessianClass.POSITIVE_DEFINITE, "J1", HessianClass.NEGATIVE_DEFINITE),
        ("lower", HessianClass.POSITIVE_DEFINITE, "J2", HessianClass.POSITIVE_DEFINITE),
        ("middle", HessianClass.NEGATIVE_DEFINITE, "J2", HessianClass.NEGATIVE_DEFINITE),
    ],
)
def test_second_derivative_correspondence(
    three_node_problem, roots, name, jtilde, v0_functional, v0_class
):
    report = verify_second_derivative_correspondence(three_node_problem, roots[name])
    assert report.passed
    reduced = {r.functional: r for r in report.reduced}
    assert reduced["Jtilde"].hessian_class is jtilde
    assert reduced[v0_functional].hessian_class is v0_class
    for check in reduced.values():
        assert check.analytic_defect <= 1e-5
        assert check.symmetry_defect <= 1e-6


def test_second_derivative_at_zero_field(f0_problem, zero_point):
    report = verify_second_derivative_correspondence(f0_problem, zero_point)
    assert report.passed
    reduced = {r.functional: r.hessian_class for r in report.reduced}
    assert reduced == {
        "Jtilde": HessianClass.POSITIVE_DEFINITE,
        "J1": HessianClass.NEGATIVE_DEFINITE,
    }


def test_weak_duality_holds(f0_problem, zero_point):
    report = weak_duality_sample(f0_problem, 50, seed=3, anchor=zero_point)
    assert report.passed
    assert report.n_samples == len(report.slacks) == 50
    assert report.slacks[0] == pytest.approx(0.0, abs=1e-10)
    assert report.min_slack >= -1e-10


def test_weak_duality_is_seeded(three_node_problem):
    a = weak_duality_sample(three_node_problem, 20, seed=9)
    b = weak_duality_sample(three_node_problem, 20, seed=9)
    assert a.slacks == b.slacks
    assert a.passed


def test_fenchel_young_gap_nonnegative(grid_2d, rng):
    p = GLProblem.build(grid_2d, 0.5, 1.0, 1.0, 0.2 * rng.standard_normal(grid_2d.n_nodes))
    n = grid_2d.n_nodes
    for _ in range(20):
        u = rng.uniform(-1.5, 1.5, n)
        v1s = rng.standard_normal(n)
        v0s = rng.uniform(-0.25 * p.K, 0.25 * p.K, n)
        scale = max(1.0, abs(eval_J(p, u)))
        assert fenchel_young_gap(p, u, v1s, v0s) >= -1e-10 * scale


def test_global_optimality_of_zero_field(f0_problem, zero_point):
    report = global_optimality_sample(f0_problem, zero_point, 40, seed=1)
    assert report.passed
    assert report.min_slack >= 0.0


def test_global_optimality_needs_Bstar(three_node_problem, roots):
    with pytest.raises(HypothesisMismatchError):
        global_optimality_sample(three_node_problem, roots["middle"], 10)


def test_constrained_sup_exact_when_feasible(f0_problem):
    sup = reduced_J2_global(f0_problem, np.zeros(15))
    assert sup.exact
    assert_allclose(sup.v0_arg, -1.0, atol=1e-12)


def test_constrained_sup_grows_with_budget(three_node_problem, roots):
    v1s = build_dual_point(three_node_problem, roots["middle"].u0).v1s
    small = reduced_J2_global(three_node_problem, v1s, 1)
    large = reduced_J2_global(three_node_problem, v1s, 32)
    assert not small.exact and not large.exact
    assert large.value >= small.value
    assert membership_B(three_node_problem, large.v0_arg)
    with pytest.raises(PreconditionError):
        reduced_J2_global(three_node_problem, v1s, 0)


def test_midpoint_convexity_near_zero_field(f0_problem):
    report = midpoint_convexity_sample(f0_problem, np.zeros(15), 10, seed=2)
    assert report.passed
    assert report.skipped == 0
    assert len(report.slacks) == 10


@pytest.fixture
def well_dominated() -> GLProblem:
    """f = 0 with 2αβ above γλ_max(−L): u₀ = 0 is a negative definite critical point."""
    return GLProblem.build(Grid.uniform(1, 7), 1.0, 1.0, 140.0)


def test_zero_field_negative_definite_when_well_dominates(well_dominated):
    p = well_dominated
    cp = find_critical_point(p, np.zeros(7))
    assert cp.hessian_class is HessianClass.NEGATIVE_DEFINITE
    assert auto_case(p, cp) == [T.T1_ITEM3, T.T2_CASE3]
    well = 0.5 * p.alpha * p.beta**2 * domain_measure(p.grid)
    for case in (T.T1_ITEM3, T.T2_CASE3):
        report = verify_gap(p, cp, case)
        assert report.passed
        assert report.J_primal == pytest.approx(well)
    second = verify_second_derivative_correspondence(p, cp)
    assert second.passed
    reduced = {r.functional: r.hessian_class for r in second.reduced}
    assert reduced == {
        "Jtilde": HessianClass.NEGATIVE_DEFINITE,
        "J2": HessianClass.NEGATIVE_DEFINITE,
    }


@pytest.mark.parametrize("factor", [0.5, 0.75, 1.5, 2.0])
def test_beta_sweep_across_spectral_threshold(factor):
    grid = Grid.uniform(1, 7)
    lam_min, _ = laplacian_extremes(grid)
    beta = factor * lam_min / 2.0
    p = GLProblem.build(grid, 1.0, 1.0, beta)
    cp = find_critical_point(p, np.zeros(7))
    below = factor < 1.0
    expected = HessianClass.POSITIVE_DEFINITE if below else HessianClass.INDEFINITE
    assert cp.hessian_class is expected
    dp = build_dual_point(p, cp.u0)
    assert membership_B(p, dp.v0s) is below

    report = verify_second_derivative_correspondence(p, cp)
    assert report.passed
    reduced = {r.functional: r.hessian_class for r in report.reduced}
    assert reduced["Jtilde"] is expected
    if below:
        assert reduced["J1"] is HessianClass.NEGATIVE_DEFINITE
        assert auto_case(p, cp) == [T.T1_ITEM1, T.T1_ITEM2, T.T2_CASE1, T.T4_GLOBAL]
    else:
        assert set(reduced) == {"Jtilde"}
        assert auto_case(p, cp) == []


GAP_SWEEP = [
    (gamma, alpha, beta, start)
    for gamma in (0.01, 0.05)
    for alpha in (0.5, 1.0, 2.0)
    for beta in (0.5, 2.0)
    for start in ("plus_bump", "minus_bump")
]


@pytest.mark.slow
@pytest.mark.parametrize("gamma, alpha, beta, start", GAP_SWEEP)
def test_gap_closes_across_parameter_sweep(gamma, alpha, beta, start):
    grid = Grid.uniform(1, 31)
    p = GLProblem.build(grid, gamma, alpha, beta, np.full(31, 0.05))
    cp = find_critical_point(p, initial_guess(p, start), max_iters=200)
    dp = build_dual_point(p, cp.u0)
    assert dp.in_Astar
    value, v0_arg = reduced_Jtilde(p, dp.v1s)
    J = eval_J(p, cp.u0)
    assert abs(J - value) <= 1e-8 * max(1.0, abs(J))
    assert_allclose(v0_arg, dp.v0s, atol=1e-8)


@pytest.mark.slow
def test_gap_closes_on_thousand_node_grid():
    grid = Grid.uniform(1, 1000)
    p = GLProblem.build(grid, 0.01, 1.0, 1.0, np.full(1000, 0.05))
    cp = find_critical_point(p, initial_guess(p, "plus_bump"), 1e-9, max_iters=200)
    assert cp.hessian_class is HessianClass.POSITIVE_DEFINITE
    report = verify_gap(p, cp, T.T1_ITEM1)
    assert report.passed
    assert report.rel_gap <= 1e-8


@pytest.mark.slow
def test_weak_duality_over_thousand_samples(three_node_problem, f0_problem, zero_point):
    for report in (
        weak_duality_sample(three_node_problem, 1000, seed=7),
        weak_duality_sample(f0_problem, 1000, seed=8, anchor=zero_point),
    ):
        assert report.passed
        assert len(report.slacks) == 1000
        assert report.min_slack >= -1e-10


@pytest.mark.slow
def test_global_optimality_over_thousand_samples(f0_problem, zero_point):
    report = global_optimality_sample(f0_problem, zero_point, 1000, seed=5)
    assert report.passed
    assert report.violations == 0

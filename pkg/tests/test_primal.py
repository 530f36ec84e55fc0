import numpy as np
import pytest
from numpy.testing import assert_allclose

from packages.core.errors import ConvergenceError, PreconditionError
from packages.core.models import HessianClass
from packages.gl.grid_ops import Grid, domain_measure
from packages.gl.oracles import fd_directional, fd_gradient
from packages.gl.primal import (
    GLProblem,
    classify_hessian,
    classify_spectrum,
    eval_F,
    eval_G,
    eval_J,
    find_critical_point,
    grad_J,
    hess_J,
    initial_guess,
    multistart,
)
from tests.conftest import LOWER_ROOT, MIDDLE_ROOT, UPPER_ROOT


@pytest.fixture
def source_problem(grid_2d, rng) -> GLProblem:
    return GLProblem.build(grid_2d, 0.2, 1.5, 0.8, 0.3 * rng.standard_normal(grid_2d.n_nodes))


def test_energy_at_zero_is_well_height(f0_problem):
    expected = 0.5 * f0_problem.alpha * f0_problem.beta**2 * domain_measure(f0_problem.grid)
    assert eval_J(f0_problem, np.zeros(15)) == pytest.approx(expected, rel=1e-12)


def test_splitting_reproduces_energy(source_problem, rng):
    for _ in range(10):
        u = rng.uniform(-1.5, 1.5, source_problem.grid.n_nodes)
        split = eval_G(source_problem, u) - eval_F(source_problem, u)
        assert split == pytest.approx(eval_J(source_problem, u), rel=1e-12, abs=1e-12)


def test_gradient_matches_finite_differences(source_problem, rng):
    w = source_problem.grid.weight
    for _ in range(5):
        u = rng.uniform(-1.0, 1.0, source_problem.grid.n_nodes)
        expected = w * grad_J(source_problem, u)
        fd = fd_gradient(lambda x: eval_J(source_problem, x), u)
        assert_allclose(fd, expected, rtol=1e-6, atol=1e-6 * np.max(np.abs(expected)))


def test_hessian_action_matches_finite_differences(source_problem, rng):
    for _ in range(5):
        u = rng.uniform(-1.0, 1.0, source_problem.grid.n_nodes)
        d = rng.standard_normal(source_problem.grid.n_nodes)
        expected = hess_J(source_problem, u) @ d
        fd = fd_directional(lambda x: grad_J(source_problem, x), u, d)
        assert_allclose(fd, expected, rtol=1e-6, atol=1e-6 * np.max(np.abs(expected)))


def test_energy_is_even_without_source(f0_problem, rng):
    u = rng.standard_normal(15)
    assert eval_J(f0_problem, u) == pytest.approx(eval_J(f0_problem, -u), rel=1e-14)
    assert_allclose(grad_J(f0_problem, -u), -grad_J(f0_problem, u), rtol=1e-14)


def test_zero_is_positive_definite_critical_point(f0_problem):
    cp = find_critical_point(f0_problem, np.zeros(15))
    assert cp.iterations == 0
    assert cp.residual_norm == 0.0
    assert cp.hessian_class is HessianClass.POSITIVE_DEFINITE
    assert cp.lambda_min > 0.0


@pytest.mark.parametrize(
    "start, expected",
    [
        (UPPER_ROOT, HessianClass.POSITIVE_DEFINITE),
        (LOWER_ROOT, HessianClass.POSITIVE_DEFINITE),
        (MIDDLE_ROOT, HessianClass.NEGATIVE_DEFINITE),
    ],
)
def test_newton_reaches_each_root(three_node_problem, start, expected):
    cp = find_critical_point(three_node_problem, np.full(3, start))
    assert cp.residual_norm <= 1e-10
    assert cp.hessian_class is expected
    assert_allclose(cp.u0, start, atol=0.02)
    assert cp.history[-1] == cp.residual_norm
    assert all(b <= a for a, b in zip(cp.history, cp.history[1:]))


def test_newton_iteration_cap(three_node_problem):
    with pytest.raises(ConvergenceError) as info:
        find_critical_point(three_node_problem, np.full(3, 3.0), max_iters=1)
    assert info.value.iterate.shape == (3,)
    assert info.value.residual > 1e-10


def test_newton_rejects_bad_tolerance(f0_problem):
    with pytest.raises(PreconditionError):
        find_critical_point(f0_problem, np.zeros(15), 0.0)


def test_newton_converges_in_two_dimensions(source_problem):
    start = initial_guess(source_problem, "plus_bump")
    cp = find_critical_point(source_problem, start, max_iters=200)
    assert np.linalg.norm(grad_J(source_problem, cp.u0)) <= 1e-10


@pytest.mark.parametrize(
    "alpha, beta",
    [(1.0, 2.0), (2.0, 1.0)],
    ids=["deep_well", "stiff_potential"],
)
def test_newton_escapes_near_singular_stall(alpha, beta):
    # From −√β·bump these runs reach a near-singular Hessian where damped steps stall.
    grid = Grid.uniform(1, 31)
    p = GLProblem.build(grid, 0.01, alpha, beta, np.full(31, 0.05))
    cp = find_critical_point(p, initial_guess(p, "minus_bump"), max_iters=200)
    assert cp.residual_norm <= 1e-10
    assert np.linalg.norm(grad_J(p, cp.u0)) <= 1e-10
    assert all(b <= a for a, b in zip(cp.history, cp.history[1:]))


def test_negated_start_gives_negated_point():
    grid = Grid.uniform(1, 31)
    p = GLProblem.build(grid, 0.01, 1.0, 1.0)
    plus = find_critical_point(p, initial_guess(p, "plus_bump"), max_iters=200)
    minus = find_critical_point(p, initial_guess(p, "minus_bump"), max_iters=200)
    assert np.max(np.abs(plus.u0)) > 0.1
    assert_allclose(minus.u0, -plus.u0, atol=1e-10)
    assert minus.hessian_class is plus.hessian_class
    assert eval_J(p, minus.u0) == pytest.approx(eval_J(p, plus.u0), rel=1e-12)


@pytest.mark.parametrize(
    "lo, hi, expected",
    [
        (1.0, 2.0, HessianClass.POSITIVE_DEFINITE),
        (-2.0, -1.0, HessianClass.NEGATIVE_DEFINITE),
        (-1.0, 1.0, HessianClass.INDEFINITE),
        (1e-12, 1.0, HessianClass.SINGULAR),
    ],
)
def test_classify_spectrum(lo, hi, expected):
    assert classify_spectrum(lo, hi) is expected


@pytest.mark.parametrize(
    "diagonal, expected",
    [
        ([1.0, 2.0, 3.0], HessianClass.POSITIVE_DEFINITE),
        ([-1.0, -2.0, -3.0], HessianClass.NEGATIVE_DEFINITE),
        ([1.0, -1.0, 2.0], HessianClass.INDEFINITE),
        ([0.0, 1.0, 2.0], HessianClass.SINGULAR),
    ],
)
def test_classify_hessian_on_diagonal_operators(diagonal, expected):
    assert classify_hessian(np.diag(diagonal)) is expected


def test_initial_guess_kinds(f0_problem):
    assert not np.any(initial_guess(f0_problem, "zero"))
    plus = initial_guess(f0_problem, "plus_bump")
    assert_allclose(initial_guess(f0_problem, "minus_bump"), -plus)
    assert_allclose(initial_guess(f0_problem, "constant", value=0.3), 0.3)
    a = initial_guess(f0_problem, "random", seed=5)
    assert_allclose(a, initial_guess(f0_problem, "random", seed=5))
    assert np.max(np.abs(a)) <= 1.0
    with pytest.raises(PreconditionError):
        initial_guess(f0_problem, "spiral")  # type: ignore[arg-type]


def test_multistart_drops_duplicates(three_node_problem):
    starts = {
        "upper": np.full(3, UPPER_ROOT),
        "upper_again": np.full(3, UPPER_ROOT + 0.01),
        "middle": np.full(3, MIDDLE_ROOT),
    }
    found = multistart(three_node_problem, starts)
    assert sorted(found) == ["middle", "upper"]


def test_problem_validation(grid_1d):
    with pytest.raises(PreconditionError):
        GLProblem.build(grid_1d, -1.0, 1.0, 1.0)
    with pytest.raises(PreconditionError):
        GLProblem.build(grid_1d, 1.0, 1.0, 1.0, K=1.0)
    with pytest.raises(PreconditionError):
        GLProblem.build(grid_1d, 1.0, 1.0, 1.0, a_star_factor=3.0)


def test_with_beta_keeps_K(f0_problem):
    other = f0_problem.with_beta(2.0)
    assert other.beta == 2.0
    assert other.K == f0_problem.K
    assert eval_J(other, np.zeros(15)) == pytest.approx(4 * eval_J(f0_problem, np.zeros(15)))


def test_problem_on_single_node_grid():
    p = GLProblem.build(Grid.uniform(1, 1), 1.0, 1.0, 1.0, [0.1])
    cp = find_critical_point(p, [0.0])
    assert abs(grad_J(p, cp.u0)[0]) <= 1e-10

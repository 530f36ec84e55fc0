import numpy as np
import pytest
from numpy.testing import assert_allclose

from packages.core.errors import DomainError, GridMismatchError, PreconditionError
from packages.gl.complex_gl import (
    ComplexGLProblem,
    StaggeredGrid,
    coulomb_project,
    covariant_adjoint,
    covariant_gradient,
    dual_order_parameter,
    eval_G0star,
    eval_G1,
    eval_G1star,
    eval_G2,
    eval_J_complex,
    eval_Jstar_complex,
    gauge_convergence,
    gauge_defect,
    gauge_transform,
    membership_complex,
    uniform_field_potential,
    weak_duality_complex,
)
from packages.gl.grid_ops import Grid
from packages.gl.primal import GLProblem, eval_J


def _random_state(grid: StaggeredGrid, rng: np.random.Generator):
    phi = rng.standard_normal(grid.n_omega_nodes) + 1j * rng.standard_normal(grid.n_omega_nodes)
    return phi, rng.standard_normal(grid.n_edges), rng.standard_normal(grid.n_nodes)


def test_grid_sizes(staggered):
    assert staggered.n_nodes == 81
    assert staggered.n_edges == 144
    assert staggered.n_cells == 64
    assert staggered.omega_shape == (5, 5)
    assert staggered.n_omega_edges == 40
    assert staggered.omega_domain_measure() == pytest.approx(25 / 64)


def test_inner_box_needs_margin():
    with pytest.raises(PreconditionError):
        StaggeredGrid.build(4)


def test_curl_of_gradient_vanishes(staggered):
    product = (staggered.curl @ staggered.grad).toarray()
    assert np.max(np.abs(product)) <= 1e-12


def test_divergence_is_negative_adjoint(staggered, rng):
    A = rng.standard_normal(staggered.n_edges)
    chi = rng.standard_normal(staggered.n_nodes)
    lhs = float(staggered.div(A) @ chi)
    rhs = -float(A @ (staggered.grad @ chi))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_uniform_field_potential_has_constant_curl(staggered):
    A = uniform_field_potential(staggered, 2.5)
    assert_allclose(staggered.curl @ A, 2.5, rtol=1e-12)


def test_magnetic_term_vanishes_for_matching_field(staggered):
    p = ComplexGLProblem(
        grid=staggered,
        gamma=1.0,
        alpha=1.0,
        beta=1.0,
        rho=1.0,
        f=np.zeros(staggered.n_omega_nodes),
        B0=2.5,
    )
    assert eval_G2(p, uniform_field_potential(staggered, 2.5)) == pytest.approx(0.0, abs=1e-20)
    assert eval_G2(p, np.zeros(staggered.n_edges)) > 0.0


def test_covariant_adjoint(complex_problem, rng):
    g = complex_problem.grid
    phi, A, _ = _random_state(g, rng)
    v1s = rng.standard_normal(g.n_omega_edges) + 1j * rng.standard_normal(g.n_omega_edges)
    lhs = np.vdot(v1s, covariant_gradient(complex_problem, phi, A))
    rhs = np.vdot(covariant_adjoint(complex_problem, v1s, A), phi)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_gauge_keeps_modulus_and_curl(complex_problem, rng):
    g = complex_problem.grid
    phi, A, chi = _random_state(g, rng)
    phi2, A2 = gauge_transform(complex_problem, phi, A, chi)
    assert_allclose(np.abs(phi2), np.abs(phi), rtol=1e-14)
    assert_allclose(g.curl @ A2, g.curl @ A, atol=1e-10)


def test_gauge_transform_checks_shapes(complex_problem):
    g = complex_problem.grid
    with pytest.raises(GridMismatchError):
        gauge_transform(complex_problem, np.zeros(g.n_omega_nodes), np.zeros(g.n_edges), [0.0])


def test_link_scheme_is_exactly_invariant(staggered, rng):
    p = ComplexGLProblem(
        grid=staggered,
        gamma=1.0,
        alpha=1.0,
        beta=1.0,
        rho=1.0,
        f=np.zeros(staggered.n_omega_nodes),
        scheme="link",
    )
    for _ in range(5):
        phi, A, chi = _random_state(staggered, rng)
        energy = eval_J_complex(p, phi, A)
        assert gauge_defect(p, phi, A, chi) <= 1e-10 * max(1.0, abs(energy))


@pytest.mark.slow
def test_forward_scheme_defect_is_first_order():
    def build(grid: StaggeredGrid) -> ComplexGLProblem:
        return ComplexGLProblem(
            grid=grid,
            gamma=1.0,
            alpha=1.0,
            beta=1.0,
            rho=1.0,
            f=np.zeros(grid.n_omega_nodes),
        )

    levels = gauge_convergence(
        build,
        [8, 16, 32, 64],
        lambda x, y: 1.0 + x + 0j * y,
        lambda x, y: x + y,
    )
    defects = [level.defect for level in levels]
    assert all(d > 0.0 for d in defects)
    ratios = [a / b for a, b in zip(defects, defects[1:], strict=False)]
    assert all(r >= 1.8 for r in ratios)


def test_coulomb_projection(complex_problem, rng):
    g = complex_problem.grid
    A = rng.standard_normal(g.n_edges)
    projected = coulomb_project(complex_problem, A)
    assert np.linalg.norm(g.div(projected)) <= 1e-8 * np.linalg.norm(A)
    assert_allclose(g.curl @ projected, g.curl @ A, atol=1e-8)
    assert_allclose(coulomb_project(complex_problem, projected), projected, atol=1e-10)


def test_coulomb_projection_removes_gradients(complex_problem, rng):
    g = complex_problem.grid
    A = g.grad @ rng.standard_normal(g.n_nodes)
    assert np.linalg.norm(coulomb_project(complex_problem, A)) <= 1e-8 * np.linalg.norm(A)


def test_zero_charge_reduces_to_scalar_energy(staggered, rng):
    gamma, alpha, beta = 0.8, 1.2, 0.7
    u = rng.uniform(-1.0, 1.0, 9)
    f = rng.standard_normal(9)
    scalar = GLProblem.build(Grid(extent=(0.5, 0.5), n_interior=(3, 3)), gamma, alpha, beta, f)

    def embed(values: np.ndarray) -> np.ndarray:
        box = np.zeros((5, 5), np.complex128)
        box[1:4, 1:4] = values.reshape(3, 3)
        return box.ravel()

    p = ComplexGLProblem(
        grid=staggered, gamma=gamma, alpha=alpha, beta=beta, rho=0.0, f=embed(f)
    )
    ring = 0.5 * alpha * beta**2 * staggered.weight * 16
    energy = eval_J_complex(p, embed(u), np.zeros(staggered.n_edges))
    assert energy == pytest.approx(eval_J(scalar, u) + ring, rel=1e-12)


def test_problem_validation(staggered):
    zeros = np.zeros(staggered.n_omega_nodes)
    with pytest.raises(PreconditionError):
        ComplexGLProblem(grid=staggered, gamma=1.0, alpha=1.0, beta=1.0, rho=-1.0, f=zeros)
    with pytest.raises(PreconditionError):
        ComplexGLProblem(grid=staggered, gamma=0.0, alpha=1.0, beta=1.0, rho=1.0, f=zeros)
    with pytest.raises(GridMismatchError):
        ComplexGLProblem(grid=staggered, gamma=1.0, alpha=1.0, beta=1.0, rho=1.0, f=zeros[:3])


def test_temperature_parameters(staggered):
    p = ComplexGLProblem.from_temperature(staggered, 0.5)
    assert (p.gamma, p.alpha, p.beta) == pytest.approx((1.0, 0.32, 0.9375))


def test_dual_conjugates_at_rest(complex_problem):
    g = complex_problem.grid
    v1s = np.zeros(g.n_omega_edges)
    v3s = np.full(g.n_omega_nodes, 0.5)
    A = np.zeros(g.n_edges)
    assert eval_G0star(complex_problem, v1s) == 0.0
    expected = g.omega_domain_measure() * (0.5**2 / 2.0 + 0.5)
    assert eval_G1star(complex_problem, v1s, v3s, A) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(DomainError):
        eval_G1star(complex_problem, v1s, np.zeros(g.n_omega_nodes), A)


def test_dual_order_parameter_attains_conjugate(complex_problem, rng):
    p = complex_problem
    g = p.grid
    v1s = rng.standard_normal(g.n_omega_edges) + 1j * rng.standard_normal(g.n_omega_edges)
    v3s = rng.uniform(0.2, 2.0, g.n_omega_nodes)
    A = rng.standard_normal(g.n_edges)
    phi = dual_order_parameter(p, v1s, v3s, A)
    v = v3s / p.alpha - np.abs(phi) ** 2 + p.beta
    w = g.weight
    value = (
        -w * float(np.real(np.vdot(v1s, covariant_gradient(p, phi, A))))
        + w * float(v @ v3s)
        - eval_G1(p, phi, v)
    )
    assert value == pytest.approx(eval_G1star(p, v1s, v3s, A), rel=1e-10)


def test_membership_certified_at_rest(complex_problem):
    g = complex_problem.grid
    m = membership_complex(complex_problem, np.zeros(g.n_omega_edges), np.ones(g.n_omega_nodes))
    assert m.in_B1 and m.in_B2 and m.b2_certified
    assert m.b2_lambda_min > 0.0


def test_membership_fails_for_strong_transport(complex_problem):
    g = complex_problem.grid
    m = membership_complex(
        complex_problem, np.full(g.n_omega_edges, 100.0), np.full(g.n_omega_nodes, 1e-3)
    )
    assert m.in_B1 and not m.in_B2


def test_membership_needs_positive_v3(complex_problem):
    g = complex_problem.grid
    m = membership_complex(complex_problem, np.zeros(g.n_omega_edges), -np.ones(g.n_omega_nodes))
    assert not m.in_B1 and not m.in_B2


def test_complex_weak_duality(complex_problem):
    report = weak_duality_complex(complex_problem, 20, seed=4)
    assert report.name == "weak_duality_complex"
    assert report.passed
    assert len(report.slacks) == 20


def test_complex_weak_duality_counts_infeasible_samples(staggered):
    p = ComplexGLProblem(
        grid=staggered,
        gamma=1.0,
        alpha=1.0,
        beta=1.0,
        rho=1000.0,
        f=np.zeros(staggered.n_omega_nodes, np.complex128),
    )
    report = weak_duality_complex(p, 10, seed=4, max_halvings=0)
    assert report.n_infeasible == 10
    assert report.slacks == []
    assert not report.passed


def test_complex_weak_duality_reports_certified_membership(complex_problem):
    report = weak_duality_complex(complex_problem, 20, seed=4)
    assert report.n_infeasible == 0
    assert report.b2_certified is True


def test_zero_charge_weak_duality_needs_no_shrinking(staggered):
    # With ρ = 0 the B₂ form is μ‖curl A‖², positive on the curlᵀ range.
    p = ComplexGLProblem(
        grid=staggered,
        gamma=0.8,
        alpha=1.2,
        beta=0.7,
        rho=0.0,
        f=np.zeros(staggered.n_omega_nodes, np.complex128),
    )
    shrink_free = weak_duality_complex(p, 50, seed=6, max_halvings=0)
    assert shrink_free.passed
    assert shrink_free.n_infeasible == 0
    assert shrink_free.slacks == weak_duality_complex(p, 50, seed=6).slacks


def test_zero_charge_dual_bound_on_scalar_embedding(staggered, rng):
    # ρ = 0, A = 0, real data: the scalar energy plus the well outside the inner box.
    gamma, alpha, beta = 0.8, 1.2, 0.7
    scalar = GLProblem.build(Grid(extent=(0.5, 0.5), n_interior=(3, 3)), gamma, alpha, beta)
    p = ComplexGLProblem(
        grid=staggered,
        gamma=gamma,
        alpha=alpha,
        beta=beta,
        rho=0.0,
        f=np.zeros(staggered.n_omega_nodes, np.complex128),
    )
    box = np.zeros((5, 5), np.complex128)
    box[1:4, 1:4] = rng.uniform(-1.0, 1.0, (3, 3))
    phi = box.ravel()
    A = np.zeros(staggered.n_edges)
    v1s = gamma * covariant_gradient(p, phi, A)
    v3s = alpha * (np.abs(phi) ** 2 - beta) + 2.0 * alpha * beta
    J = eval_J_complex(p, phi, A)
    ring = 0.5 * alpha * beta**2 * staggered.weight * 16
    assert J == pytest.approx(eval_J(scalar, np.real(box[1:4, 1:4]).ravel()) + ring, rel=1e-12)
    assert J >= eval_Jstar_complex(p, v1s, v3s, A) + eval_G2(p, A) - 1e-10 * max(1.0, abs(J))


def test_energy_finite_at_typical_temperature(staggered, rng):
    p = ComplexGLProblem.from_temperature(staggered, 0.95)
    assert p.alpha == pytest.approx(1.0 / (2.0 * (1.0 + 0.95**2) ** 2))
    assert p.beta == pytest.approx(1.0 - 0.95**4)
    for _ in range(10):
        phi, A, _ = _random_state(staggered, rng)
        assert np.isfinite(eval_J_complex(p, phi, A))
    assert weak_duality_complex(p, 10, seed=1).passed


@pytest.mark.slow
def test_complex_weak_duality_over_thousand_samples(complex_problem):
    report = weak_duality_complex(complex_problem, 1000, seed=12)
    assert report.passed
    assert report.n_infeasible == 0
    assert len(report.slacks) == 1000

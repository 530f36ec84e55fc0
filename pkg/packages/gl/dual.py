"""
Dual side of the scalar problem.

Closed-form conjugates

    F*(v₁*)       = ½⟨v₁*, (KI + γL)⁻¹ v₁*⟩
    G*(v₁*, v₀*)  = Σ w[(v₁*+f)²/(2(2v₀*+K)) + (v₀*)²/(2α) + βv₀*]
    J*(v₁*, v₀*)  = F*(v₁*) − G*(v₁*, v₀*)

the dual point of a primal field, the reduced functionals obtained by
optimizing J* over one of its arguments, and the verifiers that compare
primal and dual values, Hessian signs and sampled inequalities.

Feasible sets:
    A*  = {v₀* : a·v₀* + K > 0}            (a = a_star_factor, 2 by default)
    B*  = {v₀* : −γL + 2 diag(v₀*) ≻ 0}
    C*  = B₁ ∩ B₂ with B₁ = {2v₀* + K > 0}, B₂ = {−(γ/2)L + diag(v₀*) ≻ 0}
"""

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy import sparse
from scipy.sparse import linalg as spla

from packages.core.errors import (
    ConvergenceError,
    DomainError,
    GLDualityError,
    HypothesisMismatchError,
    IndefiniteOperatorError,
    PreconditionError,
    SolverError,
)
from packages.core.models import (
    Correspondence,
    GapReport,
    HessianClass,
    ReducedHessianCheck,
    SampleReport,
    SecondDerivativeReport,
    TheoremCase,
)
from packages.gl.grid_ops import FieldReal, check_field, dense_matrix, extremal_eigs, spd_solve
from packages.gl.oracles import fd_hessian
from packages.gl.primal import (
    CriticalPoint,
    GLProblem,
    classify_spectrum,
    default_classify_tol,
    eval_F,
    eval_J,
    grad_J,
)
from packages.shared.logging import get_logger

logger = get_logger(__name__)

_ROOT_MAX_ITERS = 200
_FD_MAX_NODES = 64


@dataclass(frozen=True, eq=False)
class DualPoint:
    """(v̂₀*, v̂₁*) built from a primal field, with membership flags."""

    v0s: FieldReal
    v1s: FieldReal
    in_Astar: bool
    in_Bstar: bool
    astar_margin: float
    bstar_lambda_min: float


@dataclass(frozen=True, eq=False)
class ConstrainedSup:
    """Best value of J*(v₁*, ·) found over A*∩B*."""

    value: float
    v0_arg: FieldReal
    exact: bool  # unconstrained argmax was feasible
    evaluations: int


# --- membership ---


def b_operator(p: GLProblem, v0s: npt.ArrayLike) -> sparse.csr_matrix:
    """−γL + 2 diag(v₀*)."""
    v0s = check_field(p.grid, v0s, "v0s")
    return sparse.csr_matrix(p.stiffness + sparse.diags(2.0 * v0s))


def _strictly_positive_definite(op: sparse.spmatrix) -> tuple[bool, float, float]:
    lam_min, lam_max = extremal_eigs(op)
    scale = max(abs(lam_min), abs(lam_max))
    return lam_min > 1e-10 * scale, lam_min, lam_max


def membership_A(p: GLProblem, v0s: npt.ArrayLike) -> bool:
    v0s = check_field(p.grid, v0s, "v0s")
    return bool(np.min(p.a_star_factor * v0s + p.K) > 1e-10 * p.K)


def membership_B(p: GLProblem, v0s: npt.ArrayLike) -> bool:
    flag, _, _ = _strictly_positive_definite(b_operator(p, v0s))
    return flag


def membership_C(p: GLProblem, v0s: npt.ArrayLike) -> tuple[bool, bool]:
    """(in_B1, in_B2) for the C* criterion."""
    v0s = check_field(p.grid, v0s, "v0s")
    in_b1 = bool(np.min(2.0 * v0s + p.K) > 1e-10 * p.K)
    half = sparse.csr_matrix(0.5 * p.stiffness + sparse.diags(v0s))
    in_b2, _, _ = _strictly_positive_definite(half)
    return in_b1, in_b2


def _denominator(p: GLProblem, v0s: FieldReal) -> FieldReal:
    """2v₀* + K, checked against the domain of the closed form."""
    d = 2.0 * v0s + p.K
    node = int(np.argmin(d))
    if d[node] <= 1e-10 * p.K:
        raise DomainError("v0s leaves A* (2v0s + K must be positive)", node, float(d[node]))
    return d


# --- conjugates ---


def eval_Fstar(p: GLProblem, v1s: npt.ArrayLike) -> float:
    v1s = check_field(p.grid, v1s, "v1s")
    return 0.5 * p.grid.weight * float(v1s @ spd_solve(p.f_operator, v1s))


def eval_Gstar(p: GLProblem, v1s: npt.ArrayLike, v0s: npt.ArrayLike) -> float:
    v1s = check_field(p.grid, v1s, "v1s")
    v0s = check_field(p.grid, v0s, "v0s")
    d = _denominator(p, v0s)
    terms = (v1s + p.f) ** 2 / (2.0 * d) + v0s**2 / (2.0 * p.alpha) + p.beta * v0s
    return p.grid.weight * float(np.sum(terms))


def eval_Jstar(p: GLProblem, v1s: npt.ArrayLike, v0s: npt.ArrayLike) -> float:
    return eval_Fstar(p, v1s) - eval_Gstar(p, v1s, v0s)


def build_dual_point(p: GLProblem, u0: npt.ArrayLike) -> DualPoint:
    u0 = check_field(p.grid, u0, "u0")
    v0s = p.alpha * (u0**2 - p.beta)
    v1s = (2.0 * v0s + p.K) * u0 - p.f
    in_b, lam_min, _ = _strictly_positive_definite(b_operator(p, v0s))
    return DualPoint(
        v0s=v0s,
        v1s=v1s,
        in_Astar=membership_A(p, v0s),
        in_Bstar=in_b,
        astar_margin=float(np.min(p.a_star_factor * v0s + p.K)),
        bstar_lambda_min=lam_min,
    )


def stationarity_residuals(p: GLProblem, dp: DualPoint) -> tuple[float, float]:
    """Norms of ∂J*/∂v₁* and ∂J*/∂v₀* (unweighted) at a dual point."""
    d = _denominator(p, dp.v0s)
    c = dp.v1s + p.f
    r_v1 = spd_solve(p.f_operator, dp.v1s) - c / d
    r_v0 = c**2 / d**2 - dp.v0s / p.alpha - p.beta
    return float(np.linalg.norm(r_v1)), float(np.linalg.norm(r_v0))


# --- reduced functionals ---


def _inner_argmax_v0(p: GLProblem, v1s: FieldReal) -> FieldReal:
    """
    Node-wise maximizer of J*(v₁*, ·) over 2t + K > 0.

    The stationarity function g(t) = c²/(2t+K)² − t/α − β (c = v₁* + f) is
    strictly decreasing there, so each node has at most one root. It is
    bracketed by (−K/2 + ε, t_max] and found by Newton steps that fall back
    to bisection whenever they leave the bracket.
    """
    K, alpha, beta = p.K, p.alpha, p.beta
    c2 = (v1s + p.f) ** 2
    eps = 1e-12 * K

    def g(t: FieldReal) -> FieldReal:
        return np.asarray(c2 / (2.0 * t + K) ** 2 - t / alpha - beta)

    lo = np.full_like(c2, -0.5 * K + eps)
    hi = alpha * np.maximum(c2 / K**2 - beta, 0.0) + alpha * beta
    g_lo = g(lo)
    if np.any(g_lo <= 0.0):
        node = int(np.argmin(g_lo))
        raise DomainError(
            "inner sup over A* is not attained (no stationary point)", node, float(g_lo[node])
        )

    a, b = lo, hi.copy()
    t = 0.5 * (a + b)
    for _ in range(_ROOT_MAX_ITERS):
        d = 2.0 * t + K
        gt = c2 / d**2 - t / alpha - beta
        dg = -4.0 * c2 / d**3 - 1.0 / alpha
        positive = gt > 0.0
        a = np.where(positive, t, a)
        b = np.where(positive, b, t)
        t_new = t - gt / dg
        outside = ~((t_new > a) & (t_new < b))
        t_new = np.where(outside, 0.5 * (a + b), t_new)
        t_new = np.where(gt == 0.0, t, t_new)
        delta = np.abs(t_new - t)
        t = t_new
        tol = 4.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(t))
        if np.all((delta <= tol) | (b - a <= tol)):
            return t
    raise ConvergenceError(
        "node-wise root finding did not converge", float(np.max(np.abs(g(t)))), t
    )


def reduced_Jtilde(p: GLProblem, v1s: npt.ArrayLike) -> tuple[float, FieldReal]:
    """J̃*(v₁*) = sup over A* of J*(v₁*, v₀*): (value, argmax v₀*)."""
    v1s = check_field(p.grid, v1s, "v1s")
    v0_arg = _inner_argmax_v0(p, v1s)
    return eval_Jstar(p, v1s, v0_arg), v0_arg


def jtilde_gradient(p: GLProblem, v1s: npt.ArrayLike) -> FieldReal:
    """Euclidean gradient of J̃* (envelope theorem): w[(KI+γL)⁻¹v₁* − (v₁*+f)/(2t+K)]."""
    v1s = check_field(p.grid, v1s, "v1s")
    t = _inner_argmax_v0(p, v1s)
    return p.grid.weight * (spd_solve(p.f_operator, v1s) - (v1s + p.f) / (2.0 * t + p.K))


def jtilde_hessian(p: GLProblem, v1s: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Closed-form Hessian w[(KI+γL)⁻¹ − diag(1/((2t+K) + 4αu²))], dense."""
    v1s = check_field(p.grid, v1s, "v1s")
    t = _inner_argmax_v0(p, v1s)
    d = 2.0 * t + p.K
    u = (v1s + p.f) / d
    resolvent = np.linalg.inv(dense_matrix(p.f_operator))
    return p.grid.weight * (resolvent - np.diag(1.0 / (d + 4.0 * p.alpha * u**2)))


def _solve_over_v1(
    p: GLProblem, v0s: FieldReal, sign: float
) -> tuple[float, FieldReal]:
    # sign = +1: B ≻ 0 (inf branch); sign = −1: B ≺ 0 (sup branch).
    _denominator(p, v0s)
    B = b_operator(p, v0s)
    u = spd_solve(sign * B, sign * p.f)
    v1_arg = np.asarray(p.f_operator @ u)
    return eval_Jstar(p, v1_arg, v0s), v1_arg


def reduced_J1(p: GLProblem, v0s: npt.ArrayLike) -> tuple[float, FieldReal]:
    """J₁*(v₀*) = inf over v₁* of J*(v₁*, v₀*), for −γL + 2v₀* ≻ 0."""
    v0s = check_field(p.grid, v0s, "v0s")
    flag, lam_min, _ = _strictly_positive_definite(b_operator(p, v0s))
    if not flag:
        raise IndefiniteOperatorError(
            f"−γL + 2v0s is not positive definite (λ_min={lam_min:.3e})",
            "reduced_J1 needs −γL + 2v0s ≻ 0; use reduced_J2_over_v1 when it is ≺ 0",
        )
    return _solve_over_v1(p, v0s, 1.0)


def reduced_J2_over_v1(p: GLProblem, v0s: npt.ArrayLike) -> tuple[float, FieldReal]:
    """J₂*(v₀*) = sup over v₁* of J*(v₁*, v₀*), for −γL + 2v₀* ≺ 0."""
    v0s = check_field(p.grid, v0s, "v0s")
    neg_flag, lam_min, _ = _strictly_positive_definite(-b_operator(p, v0s))
    if not neg_flag:
        raise IndefiniteOperatorError(
            f"−γL + 2v0s is not negative definite (λ_max={-lam_min:.3e})",
            "reduced_J2_over_v1 needs −γL + 2v0s ≺ 0; use reduced_J1 when it is ≻ 0",
        )
    return _solve_over_v1(p, v0s, -1.0)


def reduced_v0_gradient(p: GLProblem, v0s: npt.ArrayLike) -> FieldReal:
    """Euclidean gradient of J₁*/J₂* in v₀*: w(u² − v₀*/α − β) with (−γL + 2v₀*)u = f."""
    v0s = check_field(p.grid, v0s, "v0s")
    _denominator(p, v0s)
    with np.errstate(all="ignore"):
        u = np.asarray(spla.spsolve(sparse.csc_matrix(b_operator(p, v0s)), p.f), dtype=float)
    if not np.all(np.isfinite(u)):
        raise SolverError("−γL + 2v0s is singular")
    return p.grid.weight * (u**2 - v0s / p.alpha - p.beta)


def reduced_v0_hessian(p: GLProblem, v0s: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Closed-form Hessian of J₁*/J₂* in v₀*: −w(I/α + 4 U B⁻¹ U)."""
    v0s = check_field(p.grid, v0s, "v0s")
    B = dense_matrix(b_operator(p, v0s))
    u = np.linalg.solve(B, p.f)
    U = np.diag(u)
    n = p.grid.n_nodes
    return -p.grid.weight * (np.eye(n) / p.alpha + 4.0 * U @ np.linalg.solve(B, U))


def _feasible_for_J2(p: GLProblem, v0s: FieldReal) -> bool:
    return (
        bool(np.min(2.0 * v0s + p.K) > 1e-10 * p.K)
        and membership_A(p, v0s)
        and membership_B(p, v0s)
    )


def reduced_J2_global(
    p: GLProblem, v1s: npt.ArrayLike, sampler_budget: int = 64, *, seed: int = 0
) -> ConstrainedSup:
    """
    Lower bound on sup over A*∩B* of J*(v₁*, ·).

    The unconstrained node-wise argmax is returned when it is feasible. Otherwise
    it is pulled back toward v₀* = 0 (strictly feasible: −γL ≻ 0, K > 0) until
    feasible, then improved by seeded random feasible perturbations. The result
    never decreases as sampler_budget grows.
    """
    if sampler_budget < 1:
        raise PreconditionError(f"sampler_budget must be >= 1, got {sampler_budget}")
    v1s = check_field(p.grid, v1s, "v1s")
    n = p.grid.n_nodes
    center = np.zeros(n)

    t_star: FieldReal | None
    try:
        t_star = _inner_argmax_v0(p, v1s)
    except DomainError:
        t_star = None
    if t_star is not None and _feasible_for_J2(p, t_star):
        return ConstrainedSup(
            value=eval_Jstar(p, v1s, t_star), v0_arg=t_star, exact=True, evaluations=1
        )

    best_t = center
    if t_star is not None:
        s = 0.5
        while s > 2.0**-30:
            candidate = center + s * (t_star - center)
            if _feasible_for_J2(p, candidate):
                best_t = candidate
                break
            s *= 0.5
    best = eval_Jstar(p, v1s, best_t)
    evaluations = 1

    rng = np.random.default_rng(seed)
    spread = float(np.linalg.norm(best_t - center)) / math.sqrt(n) if t_star is not None else 0.0
    scale = max(spread, 1e-3 * p.K)
    for k in range(sampler_budget - 1):
        candidate = best_t + scale * 0.5 ** (k % 10) * rng.standard_normal(n)
        if not _feasible_for_J2(p, candidate):
            continue
        value = eval_Jstar(p, v1s, candidate)
        evaluations += 1
        if value > best:
            best, best_t = value, candidate
    logger.debug("Constrained sup bounded", value=best, evaluations=evaluations)
    return ConstrainedSup(value=best, v0_arg=best_t, exact=False, evaluations=evaluations)


# --- verifiers ---


def _require(case: TheoremCase, flag: str, holds: bool) -> None:
    if not holds:
        raise HypothesisMismatchError(case.value, flag)


def auto_case(p: GLProblem, cp: CriticalPoint) -> list[TheoremCase]:
    """Every theorem case whose hypotheses hold at cp."""
    dp = build_dual_point(p, cp.u0)
    _, b_min, b_max = _strictly_positive_definite(b_operator(p, dp.v0s))
    b_neg = b_max < -1e-10 * max(abs(b_min), abs(b_max))
    pd = cp.hessian_class is HessianClass.POSITIVE_DEFINITE
    nd = cp.hessian_class is HessianClass.NEGATIVE_DEFINITE
    cases: list[TheoremCase] = []
    if dp.in_Astar and pd:
        cases.append(TheoremCase.T1_ITEM1)
    if dp.in_Astar and dp.in_Bstar:
        cases.append(TheoremCase.T1_ITEM2)
    if dp.in_Astar and nd:
        cases.append(TheoremCase.T1_ITEM3)
    if dp.in_Astar and pd and dp.in_Bstar:
        cases.append(TheoremCase.T2_CASE1)
    if dp.in_Astar and pd and b_neg:
        cases.append(TheoremCase.T2_CASE2)
    if dp.in_Astar and nd and b_neg:
        cases.append(TheoremCase.T2_CASE3)
    if all(membership_C(p, dp.v0s)):
        cases.append(TheoremCase.T4_GLOBAL)
    return cases


def verify_gap(
    p: GLProblem,
    cp: CriticalPoint,
    which: TheoremCase,
    gap_tol: float = 1e-8,
    *,
    newton_tol: float = 1e-8,
    sampler_budget: int = 64,
) -> GapReport:
    """
    Compare J(u₀) with the dual value named by the theorem case.

    Raises:
        PreconditionError: u₀ is not a certified critical point.
        HypothesisMismatchError: the case's hypotheses fail at u₀.
    """
    residual = float(np.linalg.norm(grad_J(p, cp.u0)))
    if residual > newton_tol:
        raise PreconditionError(
            f"critical point not certified: residual {residual:.3e} > {newton_tol:.3e}"
        )
    dp = build_dual_point(p, cp.u0)
    primal_class = cp.hessian_class
    pd = primal_class is HessianClass.POSITIVE_DEFINITE
    nd = primal_class is HessianClass.NEGATIVE_DEFINITE

    J_primal = eval_J(p, cp.u0)
    arg_error: float | None = None
    lower_bound = False
    match which:
        case TheoremCase.T1_ITEM1 | TheoremCase.T1_ITEM3:
            _require(which, "in_Astar", dp.in_Astar)
            if which is TheoremCase.T1_ITEM1:
                _require(which, "hessian_class=PositiveDefinite", pd)
            else:
                _require(which, "hessian_class=NegativeDefinite", nd)
            J_dual, v0_arg = reduced_Jtilde(p, dp.v1s)
            arg_error = float(np.max(np.abs(v0_arg - dp.v0s)))
        case TheoremCase.T1_ITEM2:
            _require(which, "in_Astar", dp.in_Astar)
            _require(which, "in_Bstar", dp.in_Bstar)
            sup = reduced_J2_global(p, dp.v1s, sampler_budget)
            J_dual = sup.value
            arg_error = float(np.max(np.abs(sup.v0_arg - dp.v0s)))
            lower_bound = not sup.exact
        case TheoremCase.T2_CASE1:
            _require(which, "in_Astar", dp.in_Astar)
            _require(which, "hessian_class=PositiveDefinite", pd)
            _require(which, "in_Bstar", dp.in_Bstar)
            J_dual, v1_arg = reduced_J1(p, dp.v0s)
            arg_error = float(np.max(np.abs(v1_arg - dp.v1s)))
        case TheoremCase.T2_CASE2 | TheoremCase.T2_CASE3:
            _require(which, "in_Astar", dp.in_Astar)
            if which is TheoremCase.T2_CASE2:
                _require(which, "hessian_class=PositiveDefinite", pd)
            else:
                _require(which, "hessian_class=NegativeDefinite", nd)
            neg, _, _ = _strictly_positive_definite(-b_operator(p, dp.v0s))
            _require(which, "B negative definite", neg)
            J_dual, v1_arg = reduced_J2_over_v1(p, dp.v0s)
            arg_error = float(np.max(np.abs(v1_arg - dp.v1s)))
        case TheoremCase.T4_GLOBAL:
            in_b1, in_b2 = membership_C(p, dp.v0s)
            _require(which, "in_B1", in_b1)
            _require(which, "in_B2", in_b2)
            J_dual, v1_arg = reduced_J1(p, dp.v0s)
            arg_error = float(np.max(np.abs(v1_arg - dp.v1s)))
        case _:
            raise PreconditionError(f"unknown theorem case {which!r}")

    gap = J_primal - J_dual
    scale = max(1.0, abs(J_primal))
    report = GapReport(
        theorem_case=which,
        J_primal=J_primal,
        J_dual=J_dual,
        gap=gap,
        rel_gap=abs(gap) / scale,
        gap_tol=gap_tol,
        dual_arg_error=arg_error,
        lower_bound=lower_bound,
        passed=abs(gap) <= gap_tol * scale,
    )
    logger.info(
        "Gap verified",
        case=which.value,
        J_primal=J_primal,
        J_dual=J_dual,
        rel_gap=report.rel_gap,
        passed=report.passed,
    )
    return report


def _reduced_check(
    functional: str,
    variable: str,
    gradient: Callable[[FieldReal], FieldReal],
    x0: FieldReal,
    fd_eps: float,
    analytic: npt.NDArray[np.float64],
) -> ReducedHessianCheck:
    H = fd_hessian(gradient, x0, fd_eps)
    norm = float(np.linalg.norm(H, 2)) or 1.0
    asym = float(np.linalg.norm(H - H.T, 2))
    eigs = np.linalg.eigvalsh(0.5 * (H + H.T))
    lam_min, lam_max = float(eigs[0]), float(eigs[-1])
    tol = max(default_classify_tol(lam_max), 10.0 * asym)
    analytic_norm = float(np.linalg.norm(analytic, 2)) or 1.0
    return ReducedHessianCheck(
        functional=functional,
        variable=variable,
        symmetry_defect=asym / norm,
        hessian_class=classify_spectrum(lam_min, lam_max, tol),
        lambda_min=lam_min,
        lambda_max=lam_max,
        analytic_defect=float(np.linalg.norm(H - analytic, 2)) / analytic_norm,
    )


def verify_second_derivative_correspondence(
    p: GLProblem, cp: CriticalPoint, fd_eps: float = 1e-5, *, symmetry_tol: float = 1e-6
) -> SecondDerivativeReport:
    """
    Finite-difference Hessians of the reduced functionals at the dual point of cp
    and the sign correspondences they must share with δ²J(u₀).

    J̃* is differentiated in v₁* when v̂₀* ∈ A*; J₁* (resp. J₂*) in v₀* when
    −γL + 2v̂₀* is positive (resp. negative) definite.
    """
    n = p.grid.n_nodes
    if n > _FD_MAX_NODES:
        raise PreconditionError(f"finite-difference Hessians need N <= {_FD_MAX_NODES}, got {n}")
    dp = build_dual_point(p, cp.u0)
    pd = cp.hessian_class is HessianClass.POSITIVE_DEFINITE
    nd = cp.hessian_class is HessianClass.NEGATIVE_DEFINITE

    checks: dict[str, ReducedHessianCheck] = {}
    if dp.in_Astar:
        checks["Jtilde"] = _reduced_check(
            "Jtilde",
            "v1",
            lambda v1: jtilde_gradient(p, v1),
            dp.v1s,
            fd_eps,
            jtilde_hessian(p, dp.v1s),
        )
    b_pos, b_min, b_max = _strictly_positive_definite(b_operator(p, dp.v0s))
    b_neg = b_max < -1e-10 * max(abs(b_min), abs(b_max))
    if dp.in_Astar and (b_pos or b_neg):
        name = "J1" if b_pos else "J2"
        checks[name] = _reduced_check(
            name,
            "v0",
            lambda v0: reduced_v0_gradient(p, v0),
            dp.v0s,
            fd_eps,
            reduced_v0_hessian(p, dp.v0s),
        )

    def concl(name: str, expected: HessianClass) -> bool | None:
        check = checks.get(name)
        return None if check is None else check.hessian_class is expected

    PD, ND = HessianClass.POSITIVE_DEFINITE, HessianClass.NEGATIVE_DEFINITE
    correspondences = [
        Correspondence(
            statement="δ²J ≻ 0 ⇒ δ²J̃* ≻ 0",
            hypothesis_holds=pd and dp.in_Astar,
            conclusion_holds=concl("Jtilde", PD),
        ),
        Correspondence(
            statement="δ²J ≺ 0 ⇒ δ²J̃* ≺ 0",
            hypothesis_holds=nd and dp.in_Astar,
            conclusion_holds=concl("Jtilde", ND),
        ),
        Correspondence(
            statement="δ²J ≻ 0 ∧ −γL+2v̂₀* ≻ 0 ⇒ δ²J₁* ≺ 0",
            hypothesis_holds=pd and b_pos and dp.in_Astar,
            conclusion_holds=concl("J1", ND),
        ),
        Correspondence(
            statement="δ²J ≻ 0 ∧ −γL+2v̂₀* ≺ 0 ⇒ δ²J₂* ≻ 0",
            hypothesis_holds=pd and b_neg and dp.in_Astar,
            conclusion_holds=concl("J2", PD),
        ),
        Correspondence(
            statement="δ²J ≺ 0 ⇒ δ²J₂* ≺ 0",
            hypothesis_holds=nd and dp.in_Astar,
            conclusion_holds=concl("J2", ND),
        ),
    ]
    reduced = list(checks.values())
    passed = all(c.passed for c in correspondences) and all(
        r.symmetry_defect <= symmetry_tol for r in reduced
    )
    logger.info(
        "Second-derivative correspondence",
        primal_class=cp.hessian_class.value,
        reduced={r.functional: r.hessian_class.value for r in reduced},
        passed=passed,
    )
    return SecondDerivativeReport(
        primal_class=cp.hessian_class,
        primal_lambda_min=cp.lambda_min,
        primal_lambda_max=cp.lambda_max,
        reduced=reduced,
        correspondences=correspondences,
        symmetry_tol=symmetry_tol,
        passed=passed,
    )


def _sample_C_star(p: GLProblem, rng: np.random.Generator) -> FieldReal:
    n = p.grid.n_nodes
    spread = max(p.alpha * p.beta, 1e-3 * p.K)
    v0s = rng.uniform(-spread, 2.0 * spread, n)
    for _ in range(60):
        if all(membership_C(p, v0s)):
            return v0s
        v0s = 0.5 * v0s
    return np.zeros(n)


def weak_duality_sample(
    p: GLProblem,
    n_samples: int,
    seed: int = 0,
    *,
    anchor: CriticalPoint | None = None,
    tol: float = 1e-10,
) -> SampleReport:
    """
    Check J(u) ≥ J₁*(v₀*) for seeded random u and C*-feasible v₀*.

    v₀* candidates outside C* are shrunk toward 0, which lies in C*. When an
    anchor critical point with v̂₀* ∈ C* is given, its pair is checked first.
    """
    if n_samples < 1:
        raise PreconditionError(f"n_samples must be >= 1, got {n_samples}")
    rng = np.random.default_rng(seed)
    root = math.sqrt(p.beta)
    pairs: list[tuple[FieldReal, FieldReal]] = []
    if anchor is not None:
        dp = build_dual_point(p, anchor.u0)
        if all(membership_C(p, dp.v0s)):
            pairs.append((anchor.u0, dp.v0s))
    slacks: list[float] = []
    violations = 0
    for k in range(n_samples):
        if k < len(pairs):
            u, v0s = pairs[k]
        else:
            u = root * rng.uniform(-1.5, 1.5, p.grid.n_nodes)
            v0s = _sample_C_star(p, rng)
        J_u = eval_J(p, u)
        dual, _ = reduced_J1(p, v0s)
        slack = J_u - dual
        slacks.append(slack)
        if slack < -tol * max(1.0, abs(J_u)):
            violations += 1
            logger.warning("Weak duality violated", sample=k, slack=slack)
    report = SampleReport(
        name="weak_duality",
        n_samples=n_samples,
        seed=seed,
        min_slack=min(slacks),
        tolerance=tol,
        violations=violations,
        slacks=slacks,
        passed=violations == 0,
    )
    logger.info("Weak duality sampled", n_samples=n_samples, min_slack=report.min_slack)
    return report


def fenchel_young_gap(
    p: GLProblem, u: npt.ArrayLike, v1s: npt.ArrayLike, v0s: npt.ArrayLike
) -> float:
    """J(u) + F*(v₁*) + F(u) − ⟨u, v₁*⟩ − J*(v₁*, v₀*), nonnegative for v₀* in A*."""
    u = check_field(p.grid, u, "u")
    v1s = check_field(p.grid, v1s, "v1s")
    upper = eval_J(p, u) + eval_Fstar(p, v1s) + eval_F(p, u) - p.grid.weight * float(u @ v1s)
    return upper - eval_Jstar(p, v1s, v0s)


def global_optimality_sample(
    p: GLProblem,
    cp: CriticalPoint,
    n_samples: int,
    seed: int = 0,
    *,
    tol: float = 1e-8,
) -> SampleReport:
    """Sample J(u) ≥ J(u₀) around and far from a critical point with v̂₀* ∈ A*∩B*."""
    dp = build_dual_point(p, cp.u0)
    _require(TheoremCase.T1_ITEM2, "in_Astar", dp.in_Astar)
    _require(TheoremCase.T1_ITEM2, "in_Bstar", dp.in_Bstar)
    rng = np.random.default_rng(seed)
    root = math.sqrt(p.beta)
    n = p.grid.n_nodes
    J0 = eval_J(p, cp.u0)
    scales = (1e-3, 1e-2, 1e-1, 1.0)
    slacks: list[float] = []
    for k in range(n_samples):
        if k % 2 == 0:
            u = cp.u0 + scales[(k // 2) % len(scales)] * root * rng.standard_normal(n)
        else:
            u = root * rng.uniform(-2.0, 2.0, n)
        slacks.append(eval_J(p, u) - J0)
    violations = sum(1 for s in slacks if s < -tol)
    return SampleReport(
        name="global_optimality",
        n_samples=n_samples,
        seed=seed,
        min_slack=min(slacks),
        tolerance=tol,
        violations=violations,
        slacks=slacks,
        passed=violations == 0,
    )


def midpoint_convexity_sample(
    p: GLProblem,
    v1_center: npt.ArrayLike,
    n_samples: int,
    seed: int = 0,
    *,
    radius: float = 1e-2,
    sampler_budget: int = 16,
    tol: float = 1e-10,
) -> SampleReport:
    """
    Midpoint convexity of J₂*(v₁*) = sup over A*∩B* of J*(v₁*, ·) near v1_center.

    Triples where any constrained sup is only a lower bound are skipped.
    """
    v1_center = check_field(p.grid, v1_center, "v1_center")
    rng = np.random.default_rng(seed)
    scale = radius * max(1.0, float(np.max(np.abs(v1_center))))
    n = p.grid.n_nodes
    slacks: list[float] = []
    skipped = 0
    violations = 0
    for _ in range(n_samples):
        a = v1_center + scale * rng.standard_normal(n)
        b = v1_center + scale * rng.standard_normal(n)
        try:
            sups = [reduced_J2_global(p, x, sampler_budget) for x in (a, b, 0.5 * (a + b))]
        except GLDualityError:
            skipped += 1
            continue
        if not all(s.exact for s in sups):
            skipped += 1
            continue
        ja, jb, jm = (s.value for s in sups)
        slack = 0.5 * (ja + jb) - jm
        slacks.append(slack)
        if slack < -tol * max(1.0, abs(jm)):
            violations += 1
    return SampleReport(
        name="midpoint_convexity",
        n_samples=n_samples,
        seed=seed,
        min_slack=min(slacks) if slacks else 0.0,
        tolerance=tol,
        violations=violations,
        skipped=skipped,
        slacks=slacks,
        passed=violations == 0 and bool(slacks),
    )

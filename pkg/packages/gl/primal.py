"""
Primal Ginzburg-Landau functional.

    J(u) = γ/2 ⟨u, −Lu⟩ + α/2 Σ w(u² − β)² − ⟨u, f⟩

with the splitting J(u) = G(u, 0) − F(u) used by the dual side:

    F(u)    = ½⟨u, (KI + γL)u⟩
    G(u, v) = α/2 Σ w(u² − β + v)² + K/2 Σ w u² − ⟨u, f⟩

`grad_J` returns the PDE residual field; the Euclidean gradient of `eval_J`
is ``grid.weight * grad_J``.
"""

import dataclasses
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
import numpy.typing as npt
from scipy import optimize, sparse
from scipy.sparse import linalg as spla

from packages.core.errors import ConvergenceError, PreconditionError, SolverError
from packages.core.models import HessianClass
from packages.gl.grid_ops import (
    FieldReal,
    Grid,
    LaplacianOp,
    OperatorLike,
    build_laplacian,
    bump,
    check_field,
    choose_K,
    extremal_eigs,
    laplacian_extremes,
)
from packages.shared.logging import get_logger

logger = get_logger(__name__)

StartKind = Literal["zero", "plus_bump", "minus_bump", "random", "constant"]

# Armijo constant on the residual norm and the smallest accepted step.
_ARMIJO = 1e-4
_MIN_STEP = 2.0**-30
# Newton steps without the residual halving before the least-squares fallback runs.
_STALL_WINDOW = 10


@dataclass(frozen=True, eq=False)
class GLProblem:
    """Parameters of the scalar functional bound to a grid."""

    grid: Grid
    gamma: float
    alpha: float
    beta: float
    f: FieldReal
    K: float
    a_star_factor: float = 2.0

    def __post_init__(self) -> None:
        for name in ("gamma", "alpha", "beta", "K"):
            value = getattr(self, name)
            if not value > 0:
                raise PreconditionError(f"{name} must be positive, got {value}")
        if self.a_star_factor not in (1.0, 2.0):
            raise PreconditionError(f"a_star_factor must be 1 or 2, got {self.a_star_factor}")
        object.__setattr__(self, "f", check_field(self.grid, self.f, "f"))
        _, lam_max = laplacian_extremes(self.grid)
        if self.K <= self.gamma * lam_max:
            raise PreconditionError(
                f"K={self.K} does not make KI+γL positive definite (needs > {self.gamma * lam_max})"
            )

    @classmethod
    def build(
        cls,
        grid: Grid,
        gamma: float,
        alpha: float,
        beta: float,
        f: npt.ArrayLike | None = None,
        *,
        k_margin: float = 0.25,
        K: float | None = None,
        a_star_factor: float = 2.0,
    ) -> "GLProblem":
        """Build a problem, choosing K from the margin unless given."""
        source = np.zeros(grid.n_nodes) if f is None else np.asarray(f, dtype=np.float64)
        return cls(
            grid=grid,
            gamma=gamma,
            alpha=alpha,
            beta=beta,
            f=source,
            K=choose_K(grid, gamma, k_margin) if K is None else K,
            a_star_factor=a_star_factor,
        )

    def with_beta(self, beta: float) -> "GLProblem":
        return dataclasses.replace(self, beta=beta)

    @cached_property
    def laplacian(self) -> LaplacianOp:
        return build_laplacian(self.grid)

    @cached_property
    def f_operator(self) -> sparse.csr_matrix:
        """KI + γL, the operator of F."""
        n = self.grid.n_nodes
        return sparse.csr_matrix(self.K * sparse.eye(n) + self.gamma * self.laplacian.matrix)

    @cached_property
    def stiffness(self) -> sparse.csr_matrix:
        """−γL."""
        return sparse.csr_matrix(-self.gamma * self.laplacian.matrix)


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    """A Newton-certified solution of grad_J(u0) = 0."""

    u0: FieldReal
    residual_norm: float
    hessian_class: HessianClass
    lambda_min: float
    lambda_max: float
    iterations: int = 0
    history: tuple[float, ...] = field(default_factory=tuple)


# --- functional, splitting, derivatives ---


def eval_J(p: GLProblem, u: npt.ArrayLike) -> float:
    u = check_field(p.grid, u, "u")
    w = p.grid.weight
    gradient_term = 0.5 * w * float(u @ (p.stiffness @ u))
    well_term = 0.5 * p.alpha * w * float(np.sum((u**2 - p.beta) ** 2))
    return gradient_term + well_term - w * float(u @ p.f)


def eval_F(p: GLProblem, u: npt.ArrayLike) -> float:
    u = check_field(p.grid, u, "u")
    return 0.5 * p.grid.weight * float(u @ (p.f_operator @ u))


def eval_G(p: GLProblem, u: npt.ArrayLike, v: npt.ArrayLike | float = 0.0) -> float:
    u = check_field(p.grid, u, "u")
    v_arr = np.broadcast_to(np.asarray(v, dtype=np.float64), u.shape)
    w = p.grid.weight
    return w * float(
        np.sum(0.5 * p.alpha * (u**2 - p.beta + v_arr) ** 2 + 0.5 * p.K * u**2 - u * p.f)
    )


def grad_J(p: GLProblem, u: npt.ArrayLike) -> FieldReal:
    """Residual field −γLu + 2α(u² − β)u − f."""
    u = check_field(p.grid, u, "u")
    return np.asarray(p.stiffness @ u) + 2.0 * p.alpha * (u**2 - p.beta) * u - p.f


def hess_J(p: GLProblem, u: npt.ArrayLike) -> sparse.csr_matrix:
    """δ²J(u) = −γL + diag(6αu² − 2αβ), unweighted like grad_J."""
    u = check_field(p.grid, u, "u")
    diagonal = 6.0 * p.alpha * u**2 - 2.0 * p.alpha * p.beta
    return sparse.csr_matrix(p.stiffness + sparse.diags(diagonal))


def default_classify_tol(lambda_max: float) -> float:
    return 1e-8 * max(1.0, abs(lambda_max))


def classify_spectrum(
    lambda_min: float, lambda_max: float, tol: float | None = None
) -> HessianClass:
    tol = default_classify_tol(lambda_max) if tol is None else tol
    if lambda_min > tol:
        return HessianClass.POSITIVE_DEFINITE
    if lambda_max < -tol:
        return HessianClass.NEGATIVE_DEFINITE
    if min(abs(lambda_min), abs(lambda_max)) <= tol:
        return HessianClass.SINGULAR
    return HessianClass.INDEFINITE


def classify_hessian(M: OperatorLike, tol: float | None = None) -> HessianClass:
    lam_min, lam_max = extremal_eigs(M)
    return classify_spectrum(lam_min, lam_max, tol)


# --- Newton search ---


def _solve(H: sparse.spmatrix, rhs: FieldReal) -> FieldReal | None:
    with np.errstate(all="ignore"):
        try:
            step = spla.spsolve(sparse.csc_matrix(H), rhs)
        except (RuntimeError, ValueError):
            return None
    step = np.asarray(step, dtype=np.float64)
    return step if np.all(np.isfinite(step)) else None


def _line_search(
    p: GLProblem, u: FieldReal, step: FieldReal, norm: float
) -> tuple[FieldReal, FieldReal, float] | None:
    t = 1.0
    while t >= _MIN_STEP:
        trial = u + t * step
        r_trial = grad_J(p, trial)
        n_trial = float(np.linalg.norm(r_trial))
        if n_trial <= (1.0 - _ARMIJO * t) * norm:
            return trial, r_trial, n_trial
        t *= 0.5
    return None


def _least_squares_fallback(
    p: GLProblem, starts: tuple[FieldReal, ...], norm: float, newton_tol: float
) -> tuple[FieldReal, FieldReal, float] | None:
    """Best scipy root (Levenberg-Marquardt, then hybrid Powell) below ``norm``, or None."""
    best: tuple[FieldReal, FieldReal, float] | None = None
    for x0 in starts:
        for method in ("lm", "hybr"):
            with np.errstate(all="ignore"):
                sol = optimize.root(
                    lambda u: grad_J(p, u),
                    x0,
                    jac=lambda u: hess_J(p, u).toarray(),
                    method=method,
                )
            x = np.asarray(sol.x, dtype=np.float64)
            if not np.all(np.isfinite(x)):
                continue
            r = grad_J(p, x)
            n_x = float(np.linalg.norm(r))
            if n_x < (norm if best is None else best[2]):
                best = (x, r, n_x)
            if best is not None and best[2] <= newton_tol:
                return best
    return best


def _stalled(history: list[float], since: int) -> bool:
    """Residual has not halved over the last _STALL_WINDOW steps taken after index ``since``."""
    return (
        len(history) - since > _STALL_WINDOW
        and history[-1] > 0.5 * history[-1 - _STALL_WINDOW]
    )


def find_critical_point(
    p: GLProblem,
    u_init: npt.ArrayLike,
    newton_tol: float = 1e-10,
    *,
    max_iters: int = 100,
    classify_tol: float | None = None,
) -> CriticalPoint:
    """
    Damped Newton on grad_J.

    Each iteration tries the Newton step with backtracking on ‖grad_J‖. When
    the Hessian solve fails, no step length is accepted, or the residual has
    stalled, scipy's Levenberg-Marquardt and hybrid Powell root finders are
    run from the current iterate and from ``u_init``. The fallback point is
    taken only when it beats the Newton step, so ``history`` never increases.

    Raises:
        ConvergenceError: max_iters reached or no step lowers the residual;
            carries the final residual and iterate.
    """
    if not newton_tol > 0:
        raise PreconditionError(f"newton_tol must be positive, got {newton_tol}")
    start = check_field(p.grid, u_init, "u_init").copy()
    u = start.copy()
    r = grad_J(p, u)
    norm = float(np.linalg.norm(r))
    history = [norm]
    since = 0

    iterations = 0
    while norm > newton_tol:
        if iterations >= max_iters:
            logger.warning("Newton did not converge", iterations=iterations, residual=norm)
            raise ConvergenceError(f"Newton did not converge in {max_iters} iterations", norm, u)

        accepted = None
        step = _solve(hess_J(p, u), -r)
        if step is not None:
            accepted = _line_search(p, u, step, norm)

        if accepted is None or _stalled(history, since):
            logger.debug("Newton stalled, trying least-squares root", iteration=iterations)
            starts = (u,) if iterations == 0 else (u, start)
            fallback = _least_squares_fallback(p, starts, norm, newton_tol)
            since = len(history)
            if fallback is not None and (accepted is None or fallback[2] < accepted[2]):
                accepted = fallback
            if accepted is None:
                logger.warning("Newton stalled", iterations=iterations, residual=norm)
                raise ConvergenceError("Newton stalled with no residual decrease", norm, u)

        u, r, norm = accepted
        history.append(norm)
        iterations += 1
        logger.debug("Newton step", iteration=iterations, residual=norm)

    lam_min, lam_max = extremal_eigs(hess_J(p, u))
    cls = classify_spectrum(lam_min, lam_max, classify_tol)
    logger.info(
        "Critical point found",
        iterations=iterations,
        residual=norm,
        hessian_class=cls.value,
        lambda_min=lam_min,
        lambda_max=lam_max,
    )
    return CriticalPoint(
        u0=u,
        residual_norm=norm,
        hessian_class=cls,
        lambda_min=lam_min,
        lambda_max=lam_max,
        iterations=iterations,
        history=tuple(history),
    )


def initial_guess(
    p: GLProblem,
    kind: StartKind,
    *,
    value: float = 0.0,
    seed: int = 0,
) -> FieldReal:
    """Starting field for Newton: zero, ±√β·bump, seeded random or constant."""
    n = p.grid.n_nodes
    root = math.sqrt(p.beta)
    match kind:
        case "zero":
            return np.zeros(n)
        case "plus_bump":
            return root * bump(p.grid)
        case "minus_bump":
            return -root * bump(p.grid)
        case "random":
            rng = np.random.default_rng(seed)
            return root * rng.uniform(-1.0, 1.0, n)
        case "constant":
            return np.full(n, float(value))
    raise PreconditionError(f"unknown start kind {kind!r}")


def multistart(
    p: GLProblem,
    starts: Mapping[str, npt.ArrayLike],
    newton_tol: float = 1e-10,
    *,
    max_iters: int = 100,
    distinct_tol: float = 1e-6,
) -> dict[str, CriticalPoint]:
    """Run Newton from every start; keep converged points that are pairwise distinct."""
    found: dict[str, CriticalPoint] = {}
    for name, u_init in starts.items():
        try:
            cp = find_critical_point(p, u_init, newton_tol, max_iters=max_iters)
        except SolverError as exc:
            logger.warning("Start failed", start=name, error=str(exc))
            continue
        scale = max(1.0, float(np.linalg.norm(cp.u0)))
        if any(
            np.linalg.norm(cp.u0 - other.u0) <= distinct_tol * scale for other in found.values()
        ):
            logger.debug("Duplicate critical point", start=name)
            continue
        found[name] = cp
    return found

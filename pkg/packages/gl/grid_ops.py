"""
Discretization substrate.

Uniform Cartesian grids (1D/2D) with Dirichlet-eliminated interior nodes, the
second-difference Laplacian, the weighted inner product, SPD solves and
extremal eigenvalue estimates. Every definiteness test in the package goes
through `extremal_eigs`.

Node ordering is C order over ``n_interior``: in 2D node (i, j) has index
``i * n_interior[1] + j``.
"""

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt
import scipy.linalg
from scipy import sparse
from scipy.sparse import linalg as spla

from packages.core.config import get_settings
from packages.core.errors import (
    ConvergenceError,
    GridMismatchError,
    IndefiniteOperatorError,
    PreconditionError,
)
from packages.shared.logging import get_logger

logger = get_logger(__name__)

FieldReal = npt.NDArray[np.float64]

# Anything scipy can wrap with aslinearoperator.
OperatorLike = Any


@dataclass(frozen=True)
class Grid:
    """Uniform interior grid on the box [0, extent[0]] x ... with zero Dirichlet data."""

    extent: tuple[float, ...]
    n_interior: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.extent) != len(self.n_interior) or len(self.extent) not in (1, 2):
            raise PreconditionError(
                f"grid must be 1D or 2D with one extent per axis, got "
                f"extent={self.extent} n_interior={self.n_interior}"
            )
        if any(n < 1 for n in self.n_interior):
            raise PreconditionError(f"n_interior must be >= 1 per axis, got {self.n_interior}")
        if any(not (e > 0) for e in self.extent):
            raise PreconditionError(f"extent must be positive, got {self.extent}")

    @classmethod
    def uniform(cls, dim: int, n: int, extent: float = 1.0) -> "Grid":
        return cls(extent=(float(extent),) * dim, n_interior=(int(n),) * dim)

    @property
    def dim(self) -> int:
        return len(self.n_interior)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(e / (n + 1) for e, n in zip(self.extent, self.n_interior, strict=True))

    @property
    def weight(self) -> float:
        return math.prod(self.h)

    @property
    def n_nodes(self) -> int:
        return math.prod(self.n_interior)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n_interior


@dataclass(frozen=True, eq=False)
class LaplacianOp:
    """Dirichlet second-difference Laplacian bound to its grid."""

    grid: Grid
    matrix: sparse.csr_matrix

    def apply(self, u: FieldReal) -> FieldReal:
        return np.asarray(self.matrix @ check_field(self.grid, u))

    def as_operator(self) -> spla.LinearOperator:
        return spla.aslinearoperator(self.matrix)


def check_field(grid: Grid, u: npt.ArrayLike, name: str = "field") -> FieldReal:
    """Return ``u`` as a float vector on ``grid`` or raise GridMismatchError."""
    arr = np.asarray(u, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != grid.n_nodes:
        raise GridMismatchError(
            f"{name} has shape {arr.shape}, grid expects ({grid.n_nodes},)"
        )
    return arr


def _lap1d(n: int, h: float) -> sparse.csr_matrix:
    v = np.ones(n) / h**2
    return sparse.spdiags([v, -2 * v, v], [-1, 0, 1], n, n).tocsr()


def build_laplacian(grid: Grid) -> LaplacianOp:
    """Assemble the 3-point (1D) or 5-point (2D) Dirichlet Laplacian."""
    h = grid.h
    if grid.dim == 1:
        matrix = _lap1d(grid.n_interior[0], h[0])
    else:
        n0, n1 = grid.n_interior
        matrix = sparse.kron(_lap1d(n0, h[0]), sparse.eye(n1)) + sparse.kron(
            sparse.eye(n0), _lap1d(n1, h[1])
        )
    return LaplacianOp(grid=grid, matrix=sparse.csr_matrix(matrix))


def laplacian_extremes(grid: Grid) -> tuple[float, float]:
    """Closed-form (λ_min, λ_max) of −L: sums of 4/h² sin²(kπ/(2(n+1)))."""
    lo = 0.0
    hi = 0.0
    for n, h in zip(grid.n_interior, grid.h, strict=True):
        lo += 4.0 / h**2 * math.sin(math.pi / (2 * (n + 1))) ** 2
        hi += 4.0 / h**2 * math.sin(n * math.pi / (2 * (n + 1))) ** 2
    return lo, hi


def inner(grid: Grid, a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    """Weighted L² pairing ⟨a, b⟩ = weight · Σ aᵢbᵢ."""
    return grid.weight * float(np.dot(check_field(grid, a, "a"), check_field(grid, b, "b")))


def domain_measure(grid: Grid) -> float:
    """|Ω_h| = weight · N."""
    return grid.weight * grid.n_nodes


def node_coordinates(grid: Grid) -> npt.NDArray[np.float64]:
    """Physical coordinates of the interior nodes, shape (N, dim)."""
    axes = [
        (np.arange(n) + 1) * h for n, h in zip(grid.n_interior, grid.h, strict=True)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def bump(grid: Grid) -> FieldReal:
    """Product-of-sines profile, 1 at the box center and 0 on the boundary."""
    x = node_coordinates(grid)
    out = np.ones(grid.n_nodes)
    for k, e in enumerate(grid.extent):
        out *= np.sin(np.pi * x[:, k] / e)
    return out


# --- operator helpers ---


def operator_size(M: OperatorLike) -> int:
    shape = M.shape
    if len(shape) != 2 or shape[0] != shape[1]:
        raise PreconditionError(f"operator must be square, got shape {shape}")
    return int(shape[0])


def dense_matrix(M: OperatorLike) -> npt.NDArray[np.float64]:
    """Materialize an operator handle as a dense array."""
    if isinstance(M, np.ndarray):
        return np.asarray(M, dtype=np.float64)
    if sparse.issparse(M):
        return np.asarray(M.toarray(), dtype=np.float64)
    n = operator_size(M)
    return np.asarray(spla.aslinearoperator(M).matmat(np.eye(n)), dtype=np.float64)


def as_operator(M: OperatorLike) -> spla.LinearOperator:
    return spla.aslinearoperator(M)


def _conjugate_gradient(
    A: spla.LinearOperator, b: FieldReal, tol: float, maxiter: int
) -> FieldReal:
    previous = np.zeros_like(b)
    iterations = 0

    def watch_curvature(xk: FieldReal) -> None:
        # x_{k+1} − x_k is parallel to the search direction.
        nonlocal iterations
        step = xk - previous
        curvature = float(step @ A.matvec(step))
        if curvature <= 0.0 and np.any(step):
            raise IndefiniteOperatorError(
                f"non-positive curvature {curvature:.3e} at CG iteration {iterations}",
                "spd_solve requires a symmetric positive definite operator",
            )
        previous[:] = xk
        iterations += 1

    x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter, callback=watch_curvature)
    x = np.asarray(x, dtype=np.float64)
    residual = float(np.linalg.norm(b - A.matvec(x)))
    if info != 0:
        raise ConvergenceError(f"CG did not converge in {maxiter} iterations", residual, x)
    logger.debug("CG converged", iterations=iterations, residual=residual)
    return x


def spd_solve(
    M: OperatorLike,
    rhs: npt.ArrayLike,
    tol: float | None = None,
    *,
    maxiter: int | None = None,
) -> FieldReal:
    """
    Solve Mx = rhs for a symmetric positive definite M.

    Small systems (N <= DENSE_CUTOFF) use a dense Cholesky factorization;
    larger ones use conjugate gradients capped at SOLVER_MAXITER_FACTOR·N
    iterations.

    Raises:
        IndefiniteOperatorError: Cholesky failure or a negative curvature direction.
        ConvergenceError: CG iteration cap reached.
    """
    settings = get_settings()
    tol = settings.solver_rtol if tol is None else tol
    b = np.asarray(rhs, dtype=np.float64)
    n = operator_size(M)
    if b.shape != (n,):
        raise GridMismatchError(f"rhs has shape {b.shape}, operator is {n}x{n}")
    if not np.any(b):
        return np.zeros(n)

    if n <= settings.dense_cutoff:
        A = dense_matrix(M)
        try:
            factor = scipy.linalg.cho_factor(A)
        except np.linalg.LinAlgError as exc:
            raise IndefiniteOperatorError(
                "Cholesky factorization failed",
                "spd_solve requires a symmetric positive definite operator",
            ) from exc
        x = scipy.linalg.cho_solve(factor, b)
        # One refinement step keeps the residual contract on mildly ill-conditioned systems.
        r = b - A @ x
        if np.linalg.norm(r) > tol * np.linalg.norm(b):
            x = x + scipy.linalg.cho_solve(factor, r)
        return np.asarray(x, dtype=np.float64)

    maxiter = maxiter or settings.solver_maxiter_factor * n
    return _conjugate_gradient(as_operator(M), b, tol, maxiter)


def extremal_eigs(M: OperatorLike, *, rtol: float | None = None) -> tuple[float, float]:
    """(λ_min, λ_max) of a symmetric operator.

    Dense eigvalsh at or below DENSE_CUTOFF, ARPACK Lanczos (eigsh) above it.
    """
    settings = get_settings()
    n = operator_size(M)
    if n <= settings.dense_cutoff:
        eigs = np.linalg.eigvalsh(dense_matrix(M))
        return float(eigs[0]), float(eigs[-1])

    rtol = settings.eig_rtol if rtol is None else rtol
    op = as_operator(M)
    # Seeded start: a symmetric v0 is orthogonal to the antisymmetric extreme modes.
    v0 = np.random.default_rng(0).standard_normal(n)
    try:
        lo = spla.eigsh(op, k=1, which="SA", tol=rtol * 1e-2, v0=v0, return_eigenvectors=False)
        hi = spla.eigsh(op, k=1, which="LA", tol=rtol * 1e-2, v0=v0, return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(
            "Lanczos eigenvalue estimate did not converge", float("nan")
        ) from exc
    return float(lo[0]), float(hi[0])


def choose_K(grid: Grid, gamma: float, margin: float = 0.25) -> float:
    """K = (1+margin)·γ·λ_max(−L), which makes KI + γL positive definite."""
    if not gamma > 0:
        raise PreconditionError(f"gamma must be positive, got {gamma}")
    if not margin > 0:
        raise PreconditionError(f"K margin must be positive, got {margin}")
    _, lam_max = laplacian_extremes(grid)
    return (1.0 + margin) * gamma * lam_max

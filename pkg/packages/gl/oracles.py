"""
Independent brute-force references for the closed forms.

Each conjugate oracle writes the supremum sup_x {bᵀx − ½xᵀHx + c} as a dense
quadratic, solves the stationarity system Hx = b and evaluates the objective
at the solution. They never call the closed-form evaluators, so agreement is a
real check. Sizes are limited to the dense path.
"""

from collections.abc import Callable

import numpy as np
import numpy.typing as npt
import scipy.linalg

from packages.core.config import get_settings
from packages.core.errors import (
    DomainError,
    GLDualityError,
    IndefiniteOperatorError,
    PreconditionError,
    SolverError,
)
from packages.gl.complex_gl import ComplexGLProblem, check_values, covariant_gradient
from packages.gl.grid_ops import FieldReal, check_field
from packages.gl.primal import GLProblem

Matrix = npt.NDArray[np.float64]


def _step(x0: FieldReal, eps: float) -> float:
    if not eps > 0:
        raise PreconditionError(f"finite-difference step must be positive, got {eps}")
    return eps * max(1.0, float(np.max(np.abs(x0))) if x0.size else 1.0)


def fd_gradient(
    fn: Callable[[FieldReal], float], x0: npt.ArrayLike, eps: float = 1e-6
) -> FieldReal:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x0, dtype=np.float64)
    h = _step(x, eps)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return out


def fd_hessian(
    grad_fn: Callable[[FieldReal], FieldReal], x0: npt.ArrayLike, eps: float = 1e-5
) -> Matrix:
    """
    Jacobian of ``grad_fn`` by central differences, one column per coordinate.

    The result is not symmetrized; callers read the asymmetry as an accuracy
    measure.

    Raises:
        SolverError: the gradient failed at a shifted point (names the coordinate).
    """
    x = np.asarray(x0, dtype=np.float64)
    h = _step(x, eps)
    n = x.size
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        try:
            plus = np.asarray(grad_fn(x + e), dtype=np.float64)
            minus = np.asarray(grad_fn(x - e), dtype=np.float64)
        except GLDualityError as exc:
            raise SolverError(f"gradient failed at coordinate {i} (step {h:.3e}): {exc}") from exc
        H[:, i] = (plus - minus) / (2.0 * h)
    return H


def fd_directional(
    grad_fn: Callable[[FieldReal], FieldReal],
    x0: npt.ArrayLike,
    direction: npt.ArrayLike,
    eps: float = 1e-6,
) -> FieldReal:
    """(grad(x + hd) − grad(x − hd)) / 2h, the Hessian action on d."""
    x = np.asarray(x0, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    h = _step(x, eps)
    return (np.asarray(grad_fn(x + h * d)) - np.asarray(grad_fn(x - h * d))) / (2.0 * h)


def quadratic_sup(H: npt.ArrayLike, b: npt.ArrayLike, c: float = 0.0) -> float:
    """
    sup_x {bᵀx − ½xᵀHx} + c for symmetric positive definite H.

    Raises:
        IndefiniteOperatorError: H is not positive definite, so the sup is +inf.
    """
    H = np.asarray(H, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if H.shape[0] > get_settings().dense_cutoff:
        raise PreconditionError(f"dense oracle limited to {get_settings().dense_cutoff} unknowns")
    try:
        factor = scipy.linalg.cho_factor(0.5 * (H + H.T))
    except np.linalg.LinAlgError as exc:
        raise IndefiniteOperatorError(
            "oracle objective is unbounded above", "H must be positive definite"
        ) from exc
    x = scipy.linalg.cho_solve(factor, b)
    return float(b @ x - 0.5 * x @ (H @ x)) + c


# --- scalar conjugates ---


def fstar_oracle(p: GLProblem, v1s: npt.ArrayLike) -> float:
    """sup_u {⟨u, v₁*⟩ − F(u)}."""
    v1s = check_field(p.grid, v1s, "v1s")
    w = p.grid.weight
    return quadratic_sup(w * p.f_operator.toarray(), w * v1s)


def gstar_oracle(p: GLProblem, v1s: npt.ArrayLike, v0s: npt.ArrayLike) -> float:
    """
    sup_{u,v} {⟨u, v₁*⟩ + ⟨v, v₀*⟩ − G(u, v)}.

    With z = u² − β + v the objective separates into a quadratic in (u, z);
    it is bounded only when 2v₀* + K > 0.
    """
    v1s = check_field(p.grid, v1s, "v1s")
    v0s = check_field(p.grid, v0s, "v0s")
    d = 2.0 * v0s + p.K
    node = int(np.argmin(d))
    if d[node] <= 0.0:
        raise DomainError("oracle sup is unbounded (2v0s + K <= 0)", node, float(d[node]))
    w = p.grid.weight
    n = p.grid.n_nodes
    H = np.diag(np.concatenate([w * d, np.full(n, w * p.alpha)]))
    b = np.concatenate([w * (v1s + p.f), w * v0s])
    return quadratic_sup(H, b, w * p.beta * float(np.sum(v0s)))


# --- complex conjugates ---


def g0star_oracle(p: ComplexGLProblem, v1s: npt.ArrayLike) -> float:
    """sup_y {⟨y, v₁*⟩ − γ/2 Σ w|y|²} over complex edge fields, realified."""
    v1s = check_values(v1s, p.grid.n_omega_edges, "v1s")
    w = p.grid.weight
    m = v1s.size
    H = p.gamma * w * np.eye(2 * m)
    b = w * np.concatenate([v1s.real, v1s.imag])
    return quadratic_sup(H, b)


def _dense_covariant(p: ComplexGLProblem, A: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    n = p.grid.n_omega_nodes
    columns = [covariant_gradient(p, np.eye(n, dtype=np.complex128)[k], A) for k in range(n)]
    return np.stack(columns, axis=1)


def g1star_oracle(
    p: ComplexGLProblem, v1s: npt.ArrayLike, v3s: npt.ArrayLike, A: npt.ArrayLike
) -> float:
    """
    sup_{φ,v} {−⟨v₁*, D_A φ⟩ + ⟨v, v₃*⟩ − G₁(φ, v)} with φ = x + iy.

    D_A is assembled column by column from unit vectors. The quadratic in
    (x, y, z), z = |φ|² − β + v, is bounded only when v₃* > 0.
    """
    g = p.grid
    v1s = check_values(v1s, g.n_omega_edges, "v1s")
    v3s = check_values(v3s, g.n_omega_nodes, "v3s", np.float64)
    node = int(np.argmin(v3s))
    if v3s[node] <= 0.0:
        raise DomainError("oracle sup is unbounded (v3s <= 0)", node, float(v3s[node]))
    w = g.weight
    pulled = _dense_covariant(p, A).conj().T @ v1s
    h_phi = 2.0 * w * v3s
    H = np.diag(np.concatenate([h_phi, h_phi, np.full(v3s.size, w * p.alpha)]))
    b = np.concatenate(
        [w * (-pulled.real + p.f.real), w * (-pulled.imag + p.f.imag), w * v3s]
    )
    return quadratic_sup(H, b, w * p.beta * float(np.sum(v3s)))

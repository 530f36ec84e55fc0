"""
Complex Ginzburg-Landau energy with a magnetic potential on a 2D staggered grid.

    J(φ, A) = γ/2 Σ_e w|D_A φ|² + α/2 Σ_n w(|φ|² − β)² − ⟨φ, f⟩ + μ Σ_c w(curl A − B₀)²

Ω₁ = [0, Lx] x [0, Ly] is split into cells. A lives on the cell edges of Ω₁, the
order parameter φ on the nodes of a rectangular sub-box Ω (at least two cells
away from ∂Ω₁), curl A on cells. grad (nodes → edges) and curl (edges → cells)
satisfy curl∘grad = 0; the divergence is −gradᵀ, which carries the natural
A·n = 0 condition on ∂Ω₁. One weight w = hx·hy is used for nodes, edges and
cells.

The pairing on complex fields is ⟨a, b⟩ = w Re Σ conj(a)·b.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Literal

import numpy as np
import numpy.typing as npt
from scipy import sparse
from scipy.sparse import linalg as spla

from packages.core.errors import DomainError, GridMismatchError, PreconditionError, SolverError
from packages.core.models import SampleReport
from packages.shared.logging import get_logger

logger = get_logger(__name__)

FieldComplex = npt.NDArray[np.complex128]
VectorField = npt.NDArray[np.float64]
Scheme = Literal["forward", "link"]
IndexArray = npt.NDArray[np.int64]
Coords = npt.NDArray[np.float64]
NodeFn = Callable[[Coords, Coords], npt.ArrayLike]
EdgeFn = Callable[[Coords, Coords], tuple[npt.ArrayLike, npt.ArrayLike]]

_MIN_MARGIN_CELLS = 2
_B2_DENSE_CELLS = 400


@dataclass(frozen=True)
class StaggeredGrid:
    """Ω₁ with its cell/edge/node complex and the node box [lo, hi] holding Ω."""

    cells: tuple[int, int]
    extent: tuple[float, float]
    inner_lo: tuple[int, int]
    inner_hi: tuple[int, int]

    def __post_init__(self) -> None:
        for k in range(2):
            n, lo, hi = self.cells[k], self.inner_lo[k], self.inner_hi[k]
            if lo < _MIN_MARGIN_CELLS or hi > n - _MIN_MARGIN_CELLS or hi <= lo:
                raise PreconditionError(
                    f"Ω must sit at least {_MIN_MARGIN_CELLS} cells inside Ω₁ on axis {k}: "
                    f"nodes [{lo}, {hi}] of 0..{n}"
                )

    @classmethod
    def build(
        cls,
        cells: int,
        *,
        extent: float = 1.0,
        inner: tuple[float, float] = (0.25, 0.75),
    ) -> "StaggeredGrid":
        """Square Ω₁ with `cells` cells per axis; Ω = [inner[0], inner[1]]² in units of extent."""
        lo = int(round(inner[0] * cells))
        hi = int(round(inner[1] * cells))
        return cls(
            cells=(cells, cells),
            extent=(float(extent), float(extent)),
            inner_lo=(lo, lo),
            inner_hi=(hi, hi),
        )

    @property
    def h(self) -> tuple[float, float]:
        return (self.extent[0] / self.cells[0], self.extent[1] / self.cells[1])

    @property
    def weight(self) -> float:
        return self.h[0] * self.h[1]

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.cells[0] + 1, self.cells[1] + 1)

    @property
    def n_nodes(self) -> int:
        return (self.cells[0] + 1) * (self.cells[1] + 1)

    @property
    def n_x_edges(self) -> int:
        return self.cells[0] * (self.cells[1] + 1)

    @property
    def n_edges(self) -> int:
        return self.n_x_edges + (self.cells[0] + 1) * self.cells[1]

    @property
    def n_cells(self) -> int:
        return self.cells[0] * self.cells[1]

    @property
    def omega_shape(self) -> tuple[int, int]:
        return (
            self.inner_hi[0] - self.inner_lo[0] + 1,
            self.inner_hi[1] - self.inner_lo[1] + 1,
        )

    @property
    def n_omega_nodes(self) -> int:
        return self.omega_shape[0] * self.omega_shape[1]

    # index tables

    @cached_property
    def _node_ids(self) -> npt.NDArray[np.int64]:
        return np.arange(self.n_nodes).reshape(self.node_shape)

    @cached_property
    def _x_edge_ids(self) -> npt.NDArray[np.int64]:
        nx, ny = self.cells
        return np.arange(nx * (ny + 1)).reshape(nx, ny + 1)

    @cached_property
    def _y_edge_ids(self) -> npt.NDArray[np.int64]:
        nx, ny = self.cells
        return self.n_x_edges + np.arange((nx + 1) * ny).reshape(nx + 1, ny)

    @cached_property
    def node_coordinates(self) -> npt.NDArray[np.float64]:
        hx, hy = self.h
        i, j = np.meshgrid(
            np.arange(self.node_shape[0]), np.arange(self.node_shape[1]), indexing="ij"
        )
        return np.stack([(i * hx).ravel(), (j * hy).ravel()], axis=1)

    @cached_property
    def edge_midpoints(self) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.int64]]:
        """Midpoint coordinates of every edge and its direction (0 = x, 1 = y)."""
        hx, hy = self.h
        nx, ny = self.cells
        ix, jx = np.meshgrid(np.arange(nx), np.arange(ny + 1), indexing="ij")
        iy, jy = np.meshgrid(np.arange(nx + 1), np.arange(ny), indexing="ij")
        xs = np.stack([((ix + 0.5) * hx).ravel(), (jx * hy).ravel()], axis=1)
        ys = np.stack([(iy * hx).ravel(), ((jy + 0.5) * hy).ravel()], axis=1)
        direction = np.concatenate([np.zeros(len(xs), np.int64), np.ones(len(ys), np.int64)])
        return np.vstack([xs, ys]), direction

    @cached_property
    def grad(self) -> sparse.csr_matrix:
        """Nodes → edges forward differences."""
        hx, hy = self.h
        nid, xe, ye = self._node_ids, self._x_edge_ids, self._y_edge_ids
        rows = np.concatenate([xe.ravel(), xe.ravel(), ye.ravel(), ye.ravel()])
        cols = np.concatenate(
            [nid[1:, :].ravel(), nid[:-1, :].ravel(), nid[:, 1:].ravel(), nid[:, :-1].ravel()]
        )
        vals = np.concatenate(
            [
                np.full(xe.size, 1.0 / hx),
                np.full(xe.size, -1.0 / hx),
                np.full(ye.size, 1.0 / hy),
                np.full(ye.size, -1.0 / hy),
            ]
        )
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.n_edges, self.n_nodes))

    @cached_property
    def curl(self) -> sparse.csr_matrix:
        """Edges → cells, ∂ₓA_y − ∂ᵧA_x."""
        hx, hy = self.h
        xe, ye = self._x_edge_ids, self._y_edge_ids
        cid = np.arange(self.n_cells)
        rows = np.concatenate([cid, cid, cid, cid])
        cols = np.concatenate(
            [ye[1:, :].ravel(), ye[:-1, :].ravel(), xe[:, 1:].ravel(), xe[:, :-1].ravel()]
        )
        vals = np.concatenate(
            [
                np.full(self.n_cells, 1.0 / hx),
                np.full(self.n_cells, -1.0 / hx),
                np.full(self.n_cells, -1.0 / hy),
                np.full(self.n_cells, 1.0 / hy),
            ]
        )
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.n_cells, self.n_edges))

    def div(self, A: npt.ArrayLike) -> npt.NDArray[np.float64]:
        return np.asarray(-(self.grad.T @ check_edges(self, A)))

    @cached_property
    def omega_nodes(self) -> npt.NDArray[np.int64]:
        (i0, j0), (i1, j1) = self.inner_lo, self.inner_hi
        return self._node_ids[i0 : i1 + 1, j0 : j1 + 1].ravel()

    @cached_property
    def _omega_edge_table(self) -> tuple[IndexArray, IndexArray, IndexArray, Coords]:
        (i0, j0), (i1, j1) = self.inner_lo, self.inner_hi
        nid, xe, ye = self._node_ids, self._x_edge_ids, self._y_edge_ids
        local = np.full(self.n_nodes, -1, dtype=np.int64)
        local[self.omega_nodes] = np.arange(self.n_omega_nodes)
        x_edges = xe[i0:i1, j0 : j1 + 1].ravel()
        x_tails = nid[i0:i1, j0 : j1 + 1].ravel()
        x_heads = nid[i0 + 1 : i1 + 1, j0 : j1 + 1].ravel()
        y_edges = ye[i0 : i1 + 1, j0:j1].ravel()
        y_tails = nid[i0 : i1 + 1, j0:j1].ravel()
        y_heads = nid[i0 : i1 + 1, j0 + 1 : j1 + 1].ravel()
        hx, hy = self.h
        lengths = np.concatenate([np.full(x_edges.size, hx), np.full(y_edges.size, hy)])
        return (
            np.concatenate([x_edges, y_edges]),
            local[np.concatenate([x_tails, y_tails])],
            local[np.concatenate([x_heads, y_heads])],
            lengths,
        )

    @property
    def omega_edges(self) -> npt.NDArray[np.int64]:
        """Global ids of edges with both endpoints in Ω."""
        return self._omega_edge_table[0]

    @property
    def omega_tails(self) -> npt.NDArray[np.int64]:
        return self._omega_edge_table[1]

    @property
    def omega_heads(self) -> npt.NDArray[np.int64]:
        return self._omega_edge_table[2]

    @property
    def omega_edge_lengths(self) -> npt.NDArray[np.float64]:
        return self._omega_edge_table[3]

    @property
    def n_omega_edges(self) -> int:
        return int(self.omega_edges.size)

    @cached_property
    def _poisson_factor(self) -> spla.SuperLU:
        # Neumann Laplacian gradᵀgrad with node 0 pinned.
        lap = (self.grad.T @ self.grad).tocsc()
        return spla.splu(lap[1:, 1:].tocsc())

    def omega_domain_measure(self) -> float:
        return self.weight * self.n_omega_nodes


def check_edges(grid: StaggeredGrid, A: npt.ArrayLike) -> VectorField:
    arr = np.asarray(A, dtype=np.float64)
    if arr.shape != (grid.n_edges,):
        raise GridMismatchError(f"A has shape {arr.shape}, grid expects ({grid.n_edges},)")
    return arr


def check_values(
    arr: npt.ArrayLike, size: int, name: str, dtype: type = np.complex128
) -> npt.NDArray[Any]:
    out = np.asarray(arr, dtype=dtype)
    if out.shape != (size,):
        raise GridMismatchError(f"{name} has shape {out.shape}, expected ({size},)")
    return out


def sample_node_field(grid: StaggeredGrid, fn: NodeFn) -> npt.NDArray[Any]:
    """Evaluate fn(x, y) on every node of Ω₁."""
    xy = grid.node_coordinates
    return np.asarray(fn(xy[:, 0], xy[:, 1]))


def sample_edge_field(grid: StaggeredGrid, fn: EdgeFn) -> VectorField:
    """Tangential component of the vector field fn(x, y) = (A_x, A_y) at edge midpoints."""
    xy, direction = grid.edge_midpoints
    ax, ay = fn(xy[:, 0], xy[:, 1])
    ax = np.broadcast_to(np.asarray(ax, dtype=np.float64), direction.shape)
    ay = np.broadcast_to(np.asarray(ay, dtype=np.float64), direction.shape)
    return np.where(direction == 0, ax, ay)


def uniform_field_potential(grid: StaggeredGrid, B0: float) -> VectorField:
    """Symmetric gauge A = ½ B₀ (−y, x); its discrete curl is B₀ on every cell."""
    return sample_edge_field(grid, lambda x, y: (-0.5 * B0 * y, 0.5 * B0 * x))


@dataclass(frozen=True, eq=False)
class ComplexGLProblem:
    """Parameters of the complex functional bound to a staggered grid."""

    grid: StaggeredGrid
    gamma: float
    alpha: float
    beta: float
    rho: float
    f: FieldComplex
    B0: float = 0.0
    magnetic_weight: float = 1.0 / (8.0 * math.pi)
    scheme: Scheme = "forward"

    def __post_init__(self) -> None:
        for name in ("gamma", "alpha", "beta"):
            value = getattr(self, name)
            if not value > 0:
                raise PreconditionError(f"{name} must be positive, got {value}")
        if self.rho < 0 or self.magnetic_weight < 0:
            raise PreconditionError("rho and magnetic_weight must be non-negative")
        if self.scheme not in ("forward", "link"):
            raise PreconditionError(f"unknown covariant scheme {self.scheme!r}")
        object.__setattr__(self, "f", check_values(self.f, self.grid.n_omega_nodes, "f"))

    @classmethod
    def from_temperature(
        cls,
        grid: StaggeredGrid,
        t: float,
        *,
        rho: float = 1.0,
        f: npt.ArrayLike | None = None,
        **kwargs: float | str,
    ) -> "ComplexGLProblem":
        """γ = 1, α = 1/(2(1+t²)²), β = 1 − t⁴."""
        source = np.zeros(grid.n_omega_nodes, np.complex128) if f is None else np.asarray(f)
        return cls(
            grid=grid,
            gamma=1.0,
            alpha=1.0 / (2.0 * (1.0 + t**2) ** 2),
            beta=1.0 - t**4,
            rho=rho,
            f=source,
            **kwargs,  # type: ignore[arg-type]
        )


# --- operators ---


def covariant_matrix(p: ComplexGLProblem, A: npt.ArrayLike) -> sparse.csr_matrix:
    """
    D_A : Ω nodes → Ω edges.

    forward: (φ_head − φ_tail)/h − iρA_e φ_tail
    link:    (e^{−iρhA_e} φ_head − φ_tail)/h
    """
    g = p.grid
    a = check_edges(g, A)[g.omega_edges]
    h = g.omega_edge_lengths
    if p.scheme == "forward":
        head = 1.0 / h + 0j
        tail = -1.0 / h - 1j * p.rho * a
    else:
        head = np.exp(-1j * p.rho * h * a) / h
        tail = -1.0 / h + 0j
    m = g.n_omega_edges
    rows = np.concatenate([np.arange(m), np.arange(m)])
    cols = np.concatenate([g.omega_heads, g.omega_tails])
    return sparse.csr_matrix(
        (np.concatenate([head, tail]), (rows, cols)), shape=(m, g.n_omega_nodes)
    )


def covariant_gradient(
    p: ComplexGLProblem, phi: npt.ArrayLike, A: npt.ArrayLike
) -> FieldComplex:
    phi = check_values(phi, p.grid.n_omega_nodes, "phi")
    return np.asarray(covariant_matrix(p, A) @ phi)


def covariant_adjoint(
    p: ComplexGLProblem, v1s: npt.ArrayLike, A: npt.ArrayLike
) -> FieldComplex:
    """D_A^H v₁*, the adjoint for the weighted pairing (weights are uniform)."""
    v1s = check_values(v1s, p.grid.n_omega_edges, "v1s")
    return np.asarray(covariant_matrix(p, A).conj().T @ v1s)


# --- energy ---


def eval_G0(p: ComplexGLProblem, phi: npt.ArrayLike, A: npt.ArrayLike) -> float:
    """γ/2 Σ w|D_A φ|²."""
    Dphi = covariant_gradient(p, phi, A)
    return 0.5 * p.gamma * p.grid.weight * float(np.sum(np.abs(Dphi) ** 2))


def eval_G1(p: ComplexGLProblem, phi: npt.ArrayLike, v3: npt.ArrayLike | float = 0.0) -> float:
    """α/2 Σ w(|φ|² − β + v₃)² − ⟨φ, f⟩."""
    phi = check_values(phi, p.grid.n_omega_nodes, "phi")
    w = p.grid.weight
    well = 0.5 * p.alpha * w * float(np.sum((np.abs(phi) ** 2 - p.beta + v3) ** 2))
    return well - w * float(np.real(np.vdot(phi, p.f)))


def eval_G2(p: ComplexGLProblem, A: npt.ArrayLike) -> float:
    """μ Σ_cells w(curl A − B₀)²."""
    curl = p.grid.curl @ check_edges(p.grid, A)
    return p.magnetic_weight * p.grid.weight * float(np.sum((curl - p.B0) ** 2))


def eval_J_complex(p: ComplexGLProblem, phi: npt.ArrayLike, A: npt.ArrayLike) -> float:
    return eval_G0(p, phi, A) + eval_G1(p, phi) + eval_G2(p, A)


# --- gauge ---


def gauge_transform(
    p: ComplexGLProblem, phi: npt.ArrayLike, A: npt.ArrayLike, chi: npt.ArrayLike
) -> tuple[FieldComplex, VectorField]:
    """φ' = φ e^{iρχ} on Ω, A' = A + grad χ on Ω₁."""
    g = p.grid
    phi = check_values(phi, g.n_omega_nodes, "phi")
    chi = check_values(chi, g.n_nodes, "chi", np.float64)
    phase = np.exp(1j * p.rho * chi[g.omega_nodes])
    return phi * phase, check_edges(g, A) + g.grad @ chi


def coulomb_project(p: ComplexGLProblem, A: npt.ArrayLike) -> VectorField:
    """
    Gauge A into D* = {div A = 0 in Ω₁, A·n = 0 on ∂Ω₁}.

    Solves the Neumann problem gradᵀgrad χ = −gradᵀA (compatible: the right side
    sums to zero) with one node pinned, then shifts χ to mean zero.

    Raises:
        SolverError: the projected field still has a divergence above 1e-8·‖A‖.
    """
    g = p.grid
    A = check_edges(g, A)
    rhs = -(g.grad.T @ A)
    chi = np.zeros(g.n_nodes)
    chi[1:] = g._poisson_factor.solve(rhs[1:])
    chi -= chi.mean()
    projected = A + g.grad @ chi
    residual = float(np.linalg.norm(g.grad.T @ projected))
    scale = float(np.linalg.norm(A))
    if scale > 0.0 and residual > 1e-8 * scale:
        raise SolverError(f"Coulomb projection left divergence {residual:.3e} (‖A‖={scale:.3e})")
    return projected


def gauge_defect(
    p: ComplexGLProblem, phi: npt.ArrayLike, A: npt.ArrayLike, chi: npt.ArrayLike
) -> float:
    """|J(φ', A') − J(φ, A)| for the gauge transform by χ."""
    phi2, A2 = gauge_transform(p, phi, A, chi)
    return abs(eval_J_complex(p, phi2, A2) - eval_J_complex(p, phi, A))


@dataclass(frozen=True)
class GaugeLevel:
    cells: int
    h: float
    defect: float
    energy: float


def gauge_convergence(
    build: Callable[[StaggeredGrid], ComplexGLProblem],
    cells: list[int],
    phi_fn: NodeFn,
    chi_fn: NodeFn,
    a_fn: EdgeFn | None = None,
    *,
    extent: float = 1.0,
    inner: tuple[float, float] = (0.25, 0.75),
) -> list[GaugeLevel]:
    """Gauge-invariance defect of the same smooth data on a sequence of grids."""
    levels = []
    for n in cells:
        grid = StaggeredGrid.build(n, extent=extent, inner=inner)
        p = build(grid)
        phi = np.asarray(sample_node_field(grid, phi_fn), dtype=np.complex128)[grid.omega_nodes]
        chi = np.asarray(sample_node_field(grid, chi_fn), dtype=np.float64)
        A = sample_edge_field(grid, a_fn) if a_fn is not None else np.zeros(grid.n_edges)
        level = GaugeLevel(
            cells=n,
            h=grid.h[0],
            defect=gauge_defect(p, phi, A, chi),
            energy=eval_J_complex(p, phi, A),
        )
        logger.debug("Gauge level", cells=n, defect=level.defect)
        levels.append(level)
    return levels


# --- dual ---


def eval_G0star(p: ComplexGLProblem, v1s: npt.ArrayLike) -> float:
    """1/(2γ) Σ w|v₁*|²."""
    v1s = check_values(v1s, p.grid.n_omega_edges, "v1s")
    return p.grid.weight * float(np.sum(np.abs(v1s) ** 2)) / (2.0 * p.gamma)


def _zeta(p: ComplexGLProblem, v1s: npt.ArrayLike, A: npt.ArrayLike) -> FieldComplex:
    return -covariant_adjoint(p, v1s, A) + p.f


def _check_v3(p: ComplexGLProblem, v3s: npt.ArrayLike) -> npt.NDArray[np.float64]:
    v3s = check_values(v3s, p.grid.n_omega_nodes, "v3s", np.float64)
    node = int(np.argmin(v3s))
    if v3s[node] <= 0.0:
        raise DomainError("v3s leaves B1 (v3s must be positive)", node, float(v3s[node]))
    return v3s


def eval_G1star(
    p: ComplexGLProblem, v1s: npt.ArrayLike, v3s: npt.ArrayLike, A: npt.ArrayLike
) -> float:
    """Σ w[|ζ|²/(4v₃*) + (v₃*)²/(2α) + βv₃*] with ζ = −D_A^H v₁* + f."""
    v3s = _check_v3(p, v3s)
    zeta = _zeta(p, v1s, A)
    terms = np.abs(zeta) ** 2 / (4.0 * v3s) + v3s**2 / (2.0 * p.alpha) + p.beta * v3s
    return p.grid.weight * float(np.sum(terms))


def eval_Jstar_complex(
    p: ComplexGLProblem, v1s: npt.ArrayLike, v3s: npt.ArrayLike, A: npt.ArrayLike
) -> float:
    """J*(v*, A) = −G₀*(v₁*) − G₁*(v₁*, v₃*, A)."""
    return -eval_G0star(p, v1s) - eval_G1star(p, v1s, v3s, A)


def dual_order_parameter(
    p: ComplexGLProblem, v1s: npt.ArrayLike, v3s: npt.ArrayLike, A: npt.ArrayLike
) -> FieldComplex:
    """The φ attaining G₁*: ζ/(2v₃*)."""
    v3s = _check_v3(p, v3s)
    return _zeta(p, v1s, A) / (2.0 * v3s)


@dataclass(frozen=True)
class ComplexMembership:
    in_B1: bool
    in_B2: bool
    b2_certified: bool  # False when B₂ was only sampled on random directions
    b2_lambda_min: float


def _b2_matrix(
    p: ComplexGLProblem, v1s: FieldComplex, v3s: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    # Quadratic form of B₂ on D* = range(curlᵀ), in the coordinates ψ of A = curlᵀψ.
    g = p.grid
    basis = g.curl.T.tocsc()
    curl_basis = (g.curl @ basis).toarray()
    transport = sparse.csr_matrix(
        (v1s, (g.omega_tails, g.omega_edges)), shape=(g.n_omega_nodes, g.n_edges)
    )
    P = (transport @ basis).toarray()
    coupling = (p.rho**2 / (4.0 * v3s))[:, None] * P
    Q = p.magnetic_weight * curl_basis.T @ curl_basis - np.real(P.conj().T @ coupling)
    return g.weight * 0.5 * (Q + Q.T)


def b2_certifiable(grid: StaggeredGrid) -> bool:
    """Whether membership_complex decides B₂ exactly on this grid."""
    return grid.n_cells <= _B2_DENSE_CELLS


def membership_complex(
    p: ComplexGLProblem,
    v1s: npt.ArrayLike,
    v3s: npt.ArrayLike,
    *,
    n_directions: int = 64,
    seed: int = 0,
) -> ComplexMembership:
    """
    B₁: v₃* > 0 node-wise. B₂: μ‖curl A‖² − Σ w|ρ(S_Aᵀv₁*)|²/(4v₃*) > 0 on D*.

    B₂ is certified by the smallest eigenvalue of its compressed matrix on the
    curlᵀ basis when Ω₁ has at most 400 cells, and sampled on random directions
    otherwise.
    """
    g = p.grid
    v1s = check_values(v1s, g.n_omega_edges, "v1s")
    v3s = check_values(v3s, g.n_omega_nodes, "v3s", np.float64)
    in_b1 = bool(np.min(v3s) > 0.0)
    if not in_b1:
        return ComplexMembership(False, False, False, float("nan"))
    Q = _b2_matrix(p, v1s, v3s)
    scale = float(np.max(np.abs(Q))) or 1.0
    if b2_certifiable(g):
        lam_min = float(np.linalg.eigvalsh(Q)[0])
        return ComplexMembership(True, lam_min > 1e-10 * scale, True, lam_min)
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((g.n_cells, n_directions))
    directions /= np.linalg.norm(directions, axis=0)
    rayleigh = np.einsum("ik,ik->k", directions, Q @ directions)
    lam_min = float(np.min(rayleigh))
    return ComplexMembership(True, lam_min > 1e-10 * scale, False, lam_min)


def weak_duality_complex(
    p: ComplexGLProblem,
    n_samples: int,
    seed: int = 0,
    *,
    tol: float = 1e-10,
    max_halvings: int = 30,
) -> SampleReport:
    """
    Check J(φ, A) ≥ J*(v*, A) + G₂(A) for sampled φ, A ∈ D* and v* ∈ C*.

    v₁* is halved until the B₂ condition holds; samples that never get there
    are dropped and counted in ``n_infeasible``. The inner inf over A is
    bounded by the sampled A itself.
    """
    if n_samples < 1:
        raise PreconditionError(f"n_samples must be >= 1, got {n_samples}")
    g = p.grid
    rng = np.random.default_rng(seed)
    amplitude = math.sqrt(p.beta)
    slacks: list[float] = []
    violations = 0
    infeasible = 0
    certified = True
    for k in range(n_samples):
        phi = amplitude * (
            rng.uniform(-1.0, 1.0, g.n_omega_nodes) + 1j * rng.uniform(-1.0, 1.0, g.n_omega_nodes)
        )
        A = coulomb_project(p, rng.standard_normal(g.n_edges))
        v1s = rng.standard_normal(g.n_omega_edges) + 1j * rng.standard_normal(g.n_omega_edges)
        v3s = rng.uniform(0.2, 2.0, g.n_omega_nodes)
        feasible = False
        for _ in range(max_halvings + 1):
            membership = membership_complex(p, v1s, v3s, seed=seed + k)
            if membership.in_B2:
                feasible = True
                certified = certified and membership.b2_certified
                break
            v1s = 0.5 * v1s
        if not feasible:
            infeasible += 1
            logger.warning("Sample never reached B2", sample=k, halvings=max_halvings)
            continue
        J = eval_J_complex(p, phi, A)
        slack = J - (eval_Jstar_complex(p, v1s, v3s, A) + eval_G2(p, A))
        slacks.append(slack)
        if slack < -tol * max(1.0, abs(J)):
            violations += 1
            logger.warning("Complex weak duality violated", sample=k, slack=slack)
    report = SampleReport(
        name="weak_duality_complex",
        n_samples=n_samples,
        seed=seed,
        min_slack=min(slacks, default=0.0),
        tolerance=tol,
        violations=violations,
        n_infeasible=infeasible,
        b2_certified=certified and bool(slacks),
        slacks=slacks,
        passed=violations == 0 and bool(slacks),
    )
    logger.info(
        "Complex weak duality sampled",
        n_samples=n_samples,
        n_infeasible=infeasible,
        min_slack=report.min_slack,
    )
    return report

"""Shared fixtures: small grids and the problems the checks are calibrated on."""

from collections.abc import Iterator
from pathlib import Path

import numpy as np
import pytest

from packages.core.config import get_settings
from packages.gl.complex_gl import ComplexGLProblem, StaggeredGrid
from packages.gl.grid_ops import Grid
from packages.gl.primal import GLProblem

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

# Roots of 2u³ − 2u = 0.7 for the nearly decoupled three-node problem.
UPPER_ROOT = 1.15
LOWER_ROOT = -0.72
MIDDLE_ROOT = -0.43


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def grid_1d() -> Grid:
    return Grid.uniform(1, 15)


@pytest.fixture
def grid_2d() -> Grid:
    return Grid(extent=(1.0, 2.0), n_interior=(4, 5))


@pytest.fixture
def f0_problem(grid_1d: Grid) -> GLProblem:
    """f = 0, γ = α = β = 1: u₀ = 0 is a positive definite critical point."""
    return GLProblem.build(grid_1d, 1.0, 1.0, 1.0)


@pytest.fixture
def three_node_problem() -> GLProblem:
    """γ small and f = 0.7: three critical points, one per reduced-over-v₁* case."""
    grid = Grid.uniform(1, 3)
    return GLProblem.build(grid, 0.001, 1.0, 1.0, np.full(3, 0.7), k_margin=50.0)


@pytest.fixture
def staggered() -> StaggeredGrid:
    return StaggeredGrid.build(8)


@pytest.fixture
def complex_problem(staggered: StaggeredGrid) -> ComplexGLProblem:
    return ComplexGLProblem(
        grid=staggered,
        gamma=1.0,
        alpha=1.0,
        beta=1.0,
        rho=1.0,
        f=np.zeros(staggered.n_omega_nodes, np.complex128),
    )


@pytest.fixture
def low_dense_cutoff(monkeypatch: pytest.MonkeyPatch) -> Iterator[None]:
    """Force the iterative solver and Lanczos paths on small operators."""
    monkeypatch.setenv("DENSE_CUTOFF", "4")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()

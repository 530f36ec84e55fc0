"""
Verification pipelines.

Scalar experiments: build grid and problem (K from the margin), run Newton
from the configured start, then one record per requested theorem case and
one per named check. Complex experiments run the gauge, projection, oracle
and weak-duality checks on a staggered grid.

Hypothesis mismatches and domain violations become failed records; solver
failures propagate so the CLI can exit with its solver code.
"""

import math
import platform
import sys
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt
import scipy

from packages.cli.schema import ExperimentConfig, ExperimentSpec, SourceSpec
from packages.core.errors import (
    ConfigError,
    DomainError,
    GLDualityError,
    HypothesisMismatchError,
    PreconditionError,
)
from packages.core.models import (
    CheckRecord,
    EnvironmentStamp,
    SampleReport,
    Scalar,
    TheoremCase,
    VerificationReport,
)
from packages.gl.complex_gl import (
    ComplexGLProblem,
    StaggeredGrid,
    b2_certifiable,
    coulomb_project,
    eval_G0star,
    eval_G1star,
    gauge_convergence,
    gauge_transform,
    weak_duality_complex,
)
from packages.gl.dual import (
    auto_case,
    build_dual_point,
    eval_Fstar,
    eval_Gstar,
    global_optimality_sample,
    midpoint_convexity_sample,
    reduced_Jtilde,
    stationarity_residuals,
    verify_gap,
    verify_second_derivative_correspondence,
    weak_duality_sample,
)
from packages.gl.grid_ops import Grid
from packages.gl.oracles import fstar_oracle, g0star_oracle, g1star_oracle, gstar_oracle
from packages.gl.primal import CriticalPoint, GLProblem, eval_J, find_critical_point, initial_guess
from packages.shared.logging import get_logger

logger = get_logger(__name__)

# Gauge defect of the forward scheme must shrink at least this much per halving.
GAUGE_RATIO_MIN = 1.8
ORACLE_RTOL = 1e-8
_ORACLE_SAMPLES = 3
_ORACLE_CELLS = 8


@dataclass(frozen=True, eq=False)
class ScalarRun:
    """A certified critical point and everything the scalar checks need."""

    label: str
    config: ExperimentConfig
    problem: GLProblem
    cp: CriticalPoint
    seed: int


@dataclass(frozen=True, eq=False)
class ComplexRun:
    label: str
    config: ExperimentConfig
    spec: ExperimentSpec
    problem: ComplexGLProblem
    seed: int


# --- problem construction ---


def _source(spec: SourceSpec, size: int, *, complex_valued: bool = False) -> npt.NDArray[Any]:
    match spec.kind:
        case "zero":
            out = np.zeros(size)
        case "constant":
            out = np.full(size, spec.value)
        case "random":
            rng = np.random.default_rng(spec.seed)
            out = spec.amplitude * rng.uniform(-1.0, 1.0, size)
            if complex_valued:
                return out + 1j * spec.amplitude * rng.uniform(-1.0, 1.0, size)
    return out.astype(np.complex128) if complex_valued else out


def build_scalar_problem(cfg: ExperimentConfig, exp: ExperimentSpec) -> GLProblem:
    """Raises ConfigError when the configured values violate a precondition."""
    if cfg.grid is None:
        raise ConfigError("scalar configs need a [grid] table")
    params = cfg.parameters_for(exp)
    gamma, alpha, beta = params.resolved()
    try:
        grid = Grid(extent=cfg.grid.extents, n_interior=tuple(cfg.grid.n))
        return GLProblem.build(
            grid,
            gamma,
            alpha,
            beta,
            _source(cfg.source_for(exp), grid.n_nodes),
            k_margin=params.k_margin,
            a_star_factor=float(params.a_star_factor),
        )
    except PreconditionError as exc:
        raise ConfigError(f"experiment {exp.name!r}", [str(exc)]) from exc


def build_complex_problem(
    cfg: ExperimentConfig,
    exp: ExperimentSpec,
    grid: StaggeredGrid,
    *,
    zero_source: bool = False,
) -> ComplexGLProblem:
    params = cfg.parameters_for(exp)
    gamma, alpha, beta = params.resolved()
    f = (
        np.zeros(grid.n_omega_nodes, np.complex128)
        if zero_source
        else _source(cfg.source_for(exp), grid.n_omega_nodes, complex_valued=True)
    )
    try:
        return ComplexGLProblem(
            grid=grid,
            gamma=gamma,
            alpha=alpha,
            beta=beta,
            rho=params.rho,
            f=f,
            B0=params.B0,
            magnetic_weight=params.magnetic_weight,
            scheme=cfg.complex_spec().scheme,
        )
    except PreconditionError as exc:
        raise ConfigError(f"experiment {exp.name!r}", [str(exc)]) from exc


def _staggered_grid(cfg: ExperimentConfig, cells: int) -> StaggeredGrid:
    spec = cfg.complex_spec()
    try:
        return StaggeredGrid.build(cells, extent=spec.extent, inner=spec.inner)
    except PreconditionError as exc:
        raise ConfigError("invalid [complex] grid", [str(exc)]) from exc


# --- record helpers ---


def _context(p: GLProblem) -> dict[str, Scalar]:
    return {
        "h": p.grid.h[0],
        "n_nodes": p.grid.n_nodes,
        "gamma": p.gamma,
        "alpha": p.alpha,
        "beta": p.beta,
        "K": p.K,
    }


def _sample_record(name: str, label: str, report: SampleReport) -> CheckRecord:
    return CheckRecord(
        name=name,
        experiment=label,
        values={
            "n_samples": report.n_samples,
            "seed": report.seed,
            "min_slack": report.min_slack,
            "violations": report.violations,
            "skipped": report.skipped,
            "n_infeasible": report.n_infeasible,
            "b2_certified": report.b2_certified,
        },
        tolerances={"slack": report.tolerance},
        series={"slacks": report.slacks},
        passed=report.passed,
    )


def _failed(name: str, label: str, exc: GLDualityError) -> CheckRecord:
    return CheckRecord(name=name, experiment=label, passed=False, message=str(exc))


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


# --- scalar checks ---


def gap_record(run: ScalarRun, case: TheoremCase) -> CheckRecord:
    solver = run.config.solver
    values = _context(run.problem) | {
        "hessian_class": run.cp.hessian_class.value,
        "lambda_min": run.cp.lambda_min,
        "lambda_max": run.cp.lambda_max,
    }
    try:
        report = verify_gap(
            run.problem,
            run.cp,
            case,
            solver.gap_tol,
            newton_tol=max(solver.newton_tol, 1e-8),
            sampler_budget=solver.sampler_budget,
        )
    except (HypothesisMismatchError, DomainError, PreconditionError) as exc:
        return CheckRecord(
            name="gap",
            experiment=run.label,
            case=case,
            values=values,
            passed=False,
            message=str(exc),
        )
    values |= {
        "J_primal": report.J_primal,
        "J_dual": report.J_dual,
        "gap": report.gap,
        "rel_gap": report.rel_gap,
        "dual_arg_error": report.dual_arg_error,
        "lower_bound": report.lower_bound,
    }
    return CheckRecord(
        name="gap",
        experiment=run.label,
        case=case,
        values=values,
        tolerances={"gap": report.gap_tol},
        passed=report.passed,
    )


def check_stationarity(run: ScalarRun) -> CheckRecord:
    p = run.problem
    dp = build_dual_point(p, run.cp.u0)
    r_v1, r_v0 = stationarity_residuals(p, dp)
    tol = 1e-8 * max(1.0, float(np.linalg.norm(dp.v1s)))
    return CheckRecord(
        name="stationarity",
        experiment=run.label,
        values=_context(p)
        | {
            "residual_v1": r_v1,
            "residual_v0": r_v0,
            "in_Astar": dp.in_Astar,
            "in_Bstar": dp.in_Bstar,
            "astar_margin": dp.astar_margin,
            "bstar_lambda_min": dp.bstar_lambda_min,
        },
        tolerances={"residual": tol},
        passed=max(r_v1, r_v0) <= tol,
    )


def check_gap_closure(run: ScalarRun) -> CheckRecord:
    """|J(u₀) − J̃*(v̂₁*)| and the inner argmax against v̂₀*; needs v̂₀* ∈ A*."""
    p = run.problem
    dp = build_dual_point(p, run.cp.u0)
    if not dp.in_Astar:
        raise HypothesisMismatchError("gap_closure", "in_Astar")
    J = eval_J(p, run.cp.u0)
    J_tilde, v0_arg = reduced_Jtilde(p, dp.v1s)
    arg_error = float(np.max(np.abs(v0_arg - dp.v0s)))
    gap_tol = run.config.solver.gap_tol
    arg_tol = 1e-8 * max(1.0, float(np.max(np.abs(dp.v0s))))
    gap = J - J_tilde
    return CheckRecord(
        name="gap_closure",
        experiment=run.label,
        values=_context(p)
        | {
            "J_primal": J,
            "J_dual": J_tilde,
            "gap": gap,
            "rel_gap": abs(gap) / max(1.0, abs(J)),
            "dual_arg_error": arg_error,
        },
        tolerances={"gap": gap_tol, "dual_arg_error": arg_tol},
        passed=abs(gap) <= gap_tol * max(1.0, abs(J)) and arg_error <= arg_tol,
    )


def check_second_derivative(run: ScalarRun) -> CheckRecord:
    solver = run.config.solver
    report = verify_second_derivative_correspondence(
        run.problem, run.cp, solver.fd_eps, symmetry_tol=solver.symmetry_tol
    )
    values = _context(run.problem) | {
        "primal_class": report.primal_class.value,
        "primal_lambda_min": report.primal_lambda_min,
        "primal_lambda_max": report.primal_lambda_max,
    }
    for r in report.reduced:
        values |= {
            f"{r.functional}_class": r.hessian_class.value,
            f"{r.functional}_lambda_min": r.lambda_min,
            f"{r.functional}_lambda_max": r.lambda_max,
            f"{r.functional}_symmetry_defect": r.symmetry_defect,
            f"{r.functional}_analytic_defect": r.analytic_defect,
        }
    failing = [c.statement for c in report.correspondences if not c.passed]
    return CheckRecord(
        name="second_derivative",
        experiment=run.label,
        values=values,
        tolerances={"symmetry": report.symmetry_tol},
        passed=report.passed,
        message="; ".join(failing) or None,
    )


def check_weak_duality(run: ScalarRun) -> CheckRecord:
    report = weak_duality_sample(
        run.problem, run.config.solver.n_samples, run.seed, anchor=run.cp
    )
    return _sample_record("weak_duality", run.label, report)


def check_global_sampling(run: ScalarRun) -> CheckRecord:
    report = global_optimality_sample(run.problem, run.cp, run.config.solver.n_samples, run.seed)
    return _sample_record("global_sampling", run.label, report)


def check_conjugate_oracle(run: ScalarRun) -> CheckRecord:
    """Closed-form F* and G* against dense stationarity oracles."""
    p = run.problem
    n = p.grid.n_nodes
    rng = np.random.default_rng(run.seed)
    dp = build_dual_point(p, run.cp.u0)
    pairs = [(dp.v1s, dp.v0s)] if dp.in_Astar else []
    for _ in range(_ORACLE_SAMPLES):
        pairs.append((rng.standard_normal(n), rng.uniform(-0.25 * p.K, 0.25 * p.K, n)))
    f_err = max(_rel(eval_Fstar(p, v1), fstar_oracle(p, v1)) for v1, _ in pairs)
    g_err = max(_rel(eval_Gstar(p, v1, v0), gstar_oracle(p, v1, v0)) for v1, v0 in pairs)
    return CheckRecord(
        name="conjugate_oracle",
        experiment=run.label,
        values=_context(p) | {"Fstar_rel_error": f_err, "Gstar_rel_error": g_err},
        tolerances={"rel": ORACLE_RTOL},
        passed=max(f_err, g_err) <= ORACLE_RTOL,
    )


def check_convexity(run: ScalarRun) -> CheckRecord:
    p = run.problem
    dp = build_dual_point(p, run.cp.u0)
    solver = run.config.solver
    report = midpoint_convexity_sample(
        p, dp.v1s, solver.n_samples, run.seed, sampler_budget=solver.sampler_budget
    )
    return _sample_record("convexity", run.label, report)


SCALAR_CHECKS: dict[str, Callable[[ScalarRun], CheckRecord]] = {
    "stationarity": check_stationarity,
    "gap_closure": check_gap_closure,
    "second_derivative": check_second_derivative,
    "weak_duality": check_weak_duality,
    "global_sampling": check_global_sampling,
    "conjugate_oracle": check_conjugate_oracle,
    "convexity": check_convexity,
}


def _expand_cases(run: ScalarRun, requested: list[TheoremCase | str]) -> list[TheoremCase]:
    cases: list[TheoremCase] = []
    for item in requested:
        batch = auto_case(run.problem, run.cp) if item == "auto" else [TheoremCase(item)]
        cases.extend(c for c in batch if c not in cases)
    return cases


def run_scalar_experiment(
    cfg: ExperimentConfig, exp: ExperimentSpec, seed: int, label: str | None = None
) -> list[CheckRecord]:
    """
    Raises:
        ConfigError: the experiment does not define a valid problem.
        SolverError: Newton (or a solve inside a check) failed.
    """
    label = label or exp.name
    p = build_scalar_problem(cfg, exp)
    u_init = initial_guess(p, exp.start, value=exp.start_value, seed=seed)
    solver = cfg.solver
    cp = find_critical_point(
        p, u_init, solver.newton_tol, max_iters=solver.max_iters, classify_tol=solver.classify_tol
    )
    run = ScalarRun(label=label, config=cfg, problem=p, cp=cp, seed=seed)

    records = [gap_record(run, case) for case in _expand_cases(run, exp.cases)]
    for name in exp.checks:
        try:
            records.append(SCALAR_CHECKS[name](run))
        except (HypothesisMismatchError, DomainError, PreconditionError) as exc:
            records.append(_failed(name, label, exc))
    return records


# --- complex checks ---


def check_gauge_invariance(run: ComplexRun) -> CheckRecord:
    """
    Refinement study of the gauge defect for φ = 1 + x, χ = x + y, A = 0 (f = 0),
    plus the exact identities |φ'| = |φ| and curl A' = curl A on the run grid.
    """
    cfg, spec = run.config, run.config.complex_spec()
    levels = gauge_convergence(
        lambda g: build_complex_problem(cfg, run.spec, g, zero_source=True),
        spec.refinements,
        lambda x, y: 1.0 + x + 0j * y,
        lambda x, y: x + y,
        extent=spec.extent,
        inner=spec.inner,
    )
    defects = [lv.defect for lv in levels]
    energies = [lv.energy for lv in levels]
    ratios = [a / b if b > 0 else math.inf for a, b in zip(defects, defects[1:], strict=False)]

    p = run.problem
    g = p.grid
    rng = np.random.default_rng(run.seed)
    phi = rng.standard_normal(g.n_omega_nodes) + 1j * rng.standard_normal(g.n_omega_nodes)
    A = rng.standard_normal(g.n_edges)
    chi = rng.standard_normal(g.n_nodes)
    phi2, A2 = gauge_transform(p, phi, A, chi)
    modulus_defect = float(np.max(np.abs(np.abs(phi2) - np.abs(phi))))
    curl_A = g.curl @ A
    curl_defect = float(np.max(np.abs(g.curl @ A2 - curl_A))) / max(
        1.0, float(np.max(np.abs(curl_A)))
    )
    exact_tol = 1e-10

    if spec.scheme == "link":
        converged = all(
            d <= exact_tol * max(1.0, abs(e)) for d, e in zip(defects, energies, strict=True)
        )
    else:
        converged = bool(ratios) and all(r >= GAUGE_RATIO_MIN for r in ratios)
    return CheckRecord(
        name="gauge_invariance",
        experiment=run.label,
        values={
            "scheme": spec.scheme,
            "finest_defect": defects[-1],
            "min_ratio": min(ratios) if ratios else None,
            "modulus_defect": modulus_defect,
            "curl_defect": curl_defect,
        },
        tolerances={"ratio_min": GAUGE_RATIO_MIN, "exact": exact_tol},
        series={
            "cells": [float(lv.cells) for lv in levels],
            "h": [lv.h for lv in levels],
            "defect": defects,
            "energy": energies,
        },
        passed=converged and modulus_defect <= exact_tol and curl_defect <= exact_tol,
    )


def check_coulomb(run: ComplexRun) -> CheckRecord:
    p = run.problem
    g = p.grid
    rng = np.random.default_rng(run.seed)
    A = rng.standard_normal(g.n_edges)
    projected = coulomb_project(p, A)
    scale = float(np.linalg.norm(A))
    div_residual = float(np.linalg.norm(g.grad.T @ projected)) / scale
    curl_A = g.curl @ A
    curl_defect = float(np.linalg.norm(g.curl @ projected - curl_A)) / max(
        1.0, float(np.linalg.norm(curl_A))
    )
    idempotence = float(np.linalg.norm(coulomb_project(p, projected) - projected)) / scale
    tol = 1e-8
    return CheckRecord(
        name="coulomb",
        experiment=run.label,
        values={
            "div_residual": div_residual,
            "curl_defect": curl_defect,
            "idempotence_defect": idempotence,
        },
        tolerances={"div_residual": tol, "curl_defect": tol, "idempotence_defect": tol},
        passed=max(div_residual, curl_defect, idempotence) <= tol,
    )


def check_conjugate_oracle_complex(run: ComplexRun) -> CheckRecord:
    """G₀* and G₁* against dense stationarity oracles on a small grid."""
    p = run.problem
    if p.grid.n_cells > _ORACLE_CELLS**2:
        p = build_complex_problem(run.config, run.spec, _staggered_grid(run.config, _ORACLE_CELLS))
    g = p.grid
    rng = np.random.default_rng(run.seed)
    g0_err = g1_err = 0.0
    for _ in range(_ORACLE_SAMPLES):
        v1s = rng.standard_normal(g.n_omega_edges) + 1j * rng.standard_normal(g.n_omega_edges)
        v3s = rng.uniform(0.2, 2.0, g.n_omega_nodes)
        A = rng.standard_normal(g.n_edges)
        g0_err = max(g0_err, _rel(eval_G0star(p, v1s), g0star_oracle(p, v1s)))
        g1_err = max(g1_err, _rel(eval_G1star(p, v1s, v3s, A), g1star_oracle(p, v1s, v3s, A)))
    return CheckRecord(
        name="conjugate_oracle_complex",
        experiment=run.label,
        values={"cells": g.n_cells, "G0star_rel_error": g0_err, "G1star_rel_error": g1_err},
        tolerances={"rel": ORACLE_RTOL},
        passed=max(g0_err, g1_err) <= ORACLE_RTOL,
    )


def check_weak_duality_complex(run: ComplexRun) -> CheckRecord:
    report = weak_duality_complex(run.problem, run.config.solver.n_samples, run.seed)
    return _sample_record("weak_duality_complex", run.label, report)


COMPLEX_CHECKS: dict[str, Callable[[ComplexRun], CheckRecord]] = {
    "gauge_invariance": check_gauge_invariance,
    "coulomb": check_coulomb,
    "conjugate_oracle_complex": check_conjugate_oracle_complex,
    "weak_duality_complex": check_weak_duality_complex,
}


def run_complex_experiment(
    cfg: ExperimentConfig, exp: ExperimentSpec, seed: int, label: str | None = None
) -> list[CheckRecord]:
    label = label or exp.name
    grid = _staggered_grid(cfg, cfg.complex_spec().cells)
    run = ComplexRun(
        label=label,
        config=cfg,
        spec=exp,
        problem=build_complex_problem(cfg, exp, grid),
        seed=seed,
    )
    records = []
    for name in exp.checks:
        try:
            records.append(COMPLEX_CHECKS[name](run))
        except (DomainError, PreconditionError) as exc:
            records.append(_failed(name, label, exc))
    return records


# --- runs ---


def environment_stamp() -> EnvironmentStamp:
    return EnvironmentStamp(
        python=sys.version.split()[0],
        numpy=np.__version__,
        scipy=scipy.__version__,
        platform=platform.platform(),
    )


def _log_records(records: list[CheckRecord]) -> None:
    for r in records:
        logger.info(
            "Check recorded",
            check=r.name,
            experiment=r.experiment,
            case=r.case.value if r.case else None,
            passed=r.passed,
        )


def run_records(cfg: ExperimentConfig, suffix: str = "") -> list[CheckRecord]:
    """Every experiment of cfg in order; experiment i is seeded with cfg.seed + i."""
    runner = run_scalar_experiment if cfg.kind == "scalar" else run_complex_experiment
    records: list[CheckRecord] = []
    for i, exp in enumerate(cfg.experiments):
        batch = runner(cfg, exp, cfg.seed + i, f"{exp.name}{suffix}")
        _log_records(batch)
        records.extend(batch)
    return records


def conventions(cfg: ExperimentConfig) -> dict[str, Scalar]:
    """Modelling choices the report's numbers depend on."""
    if cfg.kind == "scalar":
        return {
            "dual_denominator": "2*v0s+K",
            "a_star_factor": cfg.parameters.a_star_factor,
            "classify_tol": cfg.solver.classify_tol or "1e-8*max(1,|lambda_max|)",
            "dimension": cfg.grid.dim if cfg.grid else 1,
        }
    spec = cfg.complex_spec()
    grid = _staggered_grid(cfg, spec.cells)
    return {
        "dimension": 2,
        "covariant_scheme": spec.scheme,
        "b2_membership": "certified" if b2_certifiable(grid) else "sampled",
    }


def run_config(cfg: ExperimentConfig) -> VerificationReport:
    return VerificationReport(
        config=cfg.model_dump(mode="json"),
        conventions=conventions(cfg),
        records=run_records(cfg),
        environment=environment_stamp(),
    )


def sweep_values(start: float, stop: float, steps: int) -> list[float]:
    if steps < 1:
        raise ConfigError(f"sweep needs at least one step, got {steps}")
    return [float(v) for v in np.linspace(start, stop, steps)]


def run_sweep(
    cfg: ExperimentConfig, param: str, start: float, stop: float, steps: int
) -> VerificationReport:
    """Run every experiment once per value of one base parameter."""
    records: list[CheckRecord] = []
    for value in sweep_values(start, stop, steps):
        swept = cfg.with_parameter(param, value)
        records.extend(run_records(swept, f"[{param}={value:.6g}]"))
    echo = cfg.model_dump(mode="json")
    echo["sweep"] = {"param": param, "from": start, "to": stop, "steps": steps}
    return VerificationReport(
        config=echo,
        conventions=conventions(cfg),
        records=records,
        environment=environment_stamp(),
    )

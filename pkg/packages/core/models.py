"""Shared data models."""

from datetime import UTC, datetime
from enum import StrEnum
from typing import Any

from pydantic import BaseModel, Field, computed_field

REPORT_SCHEMA_VERSION = 1

Scalar = float | int | str | bool | None


class HessianClass(StrEnum):
    """Definiteness class of a symmetric operator."""

    POSITIVE_DEFINITE = "PositiveDefinite"
    NEGATIVE_DEFINITE = "NegativeDefinite"
    INDEFINITE = "Indefinite"
    SINGULAR = "Singular"


class TheoremCase(StrEnum):
    """Which duality statement a gap check certifies."""

    T1_ITEM1 = "T1_item1"  # δ²J ≻ 0, sup over A*
    T1_ITEM2 = "T1_item2"  # v̂₀* ∈ A*∩B*, global criterion
    T1_ITEM3 = "T1_item3"  # δ²J ≺ 0
    T2_CASE1 = "T2_case1"  # reduced over v₁*, inf branch
    T2_CASE2 = "T2_case2"  # reduced over v₁*, sup branch with δ²J ≻ 0
    T2_CASE3 = "T2_case3"  # reduced over v₁*, sup branch with δ²J ≺ 0
    T4_GLOBAL = "T4_global"  # β-parameterized C* criterion


# --- Verification results ---


class GapReport(BaseModel):
    """Primal versus dual value at a certified critical point."""

    theorem_case: TheoremCase
    J_primal: float
    J_dual: float
    gap: float
    rel_gap: float
    gap_tol: float
    dual_arg_error: float | None = None  # max |argmax − v̂| when the reduced functional has one
    lower_bound: bool = False  # dual side is only a lower bound on the constrained sup
    passed: bool


class ReducedHessianCheck(BaseModel):
    """Finite-difference Hessian of one reduced dual functional."""

    functional: str  # "Jtilde", "J1" or "J2"
    variable: str  # "v1" or "v0"
    symmetry_defect: float
    hessian_class: HessianClass
    lambda_min: float
    lambda_max: float
    analytic_defect: float  # relative distance to the closed-form Hessian


class Correspondence(BaseModel):
    """One implication 'hypothesis ⇒ conclusion' between primal and dual Hessians."""

    statement: str
    hypothesis_holds: bool
    conclusion_holds: bool | None = None

    @property
    def passed(self) -> bool:
        return not self.hypothesis_holds or bool(self.conclusion_holds)


class SecondDerivativeReport(BaseModel):
    """Sign correspondences between δ²J(u₀) and the reduced dual Hessians."""

    primal_class: HessianClass
    primal_lambda_min: float
    primal_lambda_max: float
    reduced: list[ReducedHessianCheck] = Field(default_factory=list)
    correspondences: list[Correspondence] = Field(default_factory=list)
    symmetry_tol: float
    passed: bool


class SampleReport(BaseModel):
    """Outcome of a seeded sampling check (weak duality, global optimality, convexity)."""

    name: str
    n_samples: int
    seed: int
    min_slack: float
    tolerance: float
    violations: int
    skipped: int = 0
    n_infeasible: int = 0  # samples dropped because v* never reached the admissible set
    b2_certified: bool | None = None  # B₂ decided by eigenvalues rather than random directions
    slacks: list[float] = Field(default_factory=list)
    passed: bool


# --- Reports ---


class CheckRecord(BaseModel):
    """One executed check in a verification run."""

    name: str
    experiment: str
    case: TheoremCase | None = None
    values: dict[str, Scalar] = Field(default_factory=dict)
    tolerances: dict[str, float] = Field(default_factory=dict)
    series: dict[str, list[float]] = Field(default_factory=dict)
    passed: bool
    message: str | None = None


class EnvironmentStamp(BaseModel):
    """Where and when a report was produced. Excluded from determinism checks."""

    python: str
    numpy: str
    scipy: str
    platform: str
    timestamp: datetime = Field(default_factory=lambda: datetime.now(UTC))


class ReportSummary(BaseModel):
    total: int
    passed: int
    failed: int


class VerificationReport(BaseModel):
    """Serialized result of a `verify` or `sweep` run."""

    schema_version: int = REPORT_SCHEMA_VERSION
    config: dict[str, Any] = Field(default_factory=dict)
    conventions: dict[str, Scalar] = Field(default_factory=dict)
    records: list[CheckRecord] = Field(default_factory=list)
    environment: EnvironmentStamp | None = None

    @computed_field  # type: ignore[prop-decorator]
    @property
    def summary(self) -> ReportSummary:
        n_passed = sum(1 for r in self.records if r.passed)
        return ReportSummary(
            total=len(self.records), passed=n_passed, failed=len(self.records) - n_passed
        )

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

"""
Experiment configuration files.

TOML, validated into pydantic models that reject unknown keys. Every file
carries ``schema_version = 1``. Per-experiment ``parameters`` and ``source``
tables override the top-level ones key by key.
"""

import math
import tomllib
from pathlib import Path
from typing import Any, Literal, get_args

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from packages.core.errors import ConfigError
from packages.core.models import TheoremCase

CONFIG_SCHEMA_VERSION = 1

ScalarCheck = Literal[
    "stationarity",
    "gap_closure",
    "second_derivative",
    "weak_duality",
    "global_sampling",
    "conjugate_oracle",
    "convexity",
]
ComplexCheck = Literal[
    "gauge_invariance",
    "coulomb",
    "conjugate_oracle_complex",
    "weak_duality_complex",
]
SCALAR_CHECKS: frozenset[str] = frozenset(get_args(ScalarCheck))
COMPLEX_CHECKS: frozenset[str] = frozenset(get_args(ComplexCheck))


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(StrictModel):
    dim: Literal[1, 2] = 1
    n: list[int]
    extent: list[float] | None = None

    @model_validator(mode="after")
    def _axes(self) -> "GridSpec":
        if len(self.n) != self.dim:
            raise ValueError(f"grid.n needs {self.dim} entries, got {len(self.n)}")
        if self.extent is not None and len(self.extent) != self.dim:
            raise ValueError(f"grid.extent needs {self.dim} entries, got {len(self.extent)}")
        return self

    @property
    def extents(self) -> tuple[float, ...]:
        return tuple(self.extent) if self.extent is not None else (1.0,) * self.dim


class ParameterSpec(StrictModel):
    gamma: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    rho: float = 1.0
    B0: float = 0.0
    magnetic_weight: float = 1.0 / (8.0 * math.pi)
    temperature: float | None = None
    use_temperature: bool = False
    k_margin: float = Field(default=0.25, gt=0)
    a_star_factor: Literal[1, 2] = 2

    @model_validator(mode="after")
    def _temperature(self) -> "ParameterSpec":
        if self.use_temperature and self.temperature is None:
            raise ValueError("use_temperature = true needs parameters.temperature")
        return self

    def resolved(self) -> tuple[float, float, float]:
        """(γ, α, β), from the temperature when use_temperature is set."""
        if self.use_temperature and self.temperature is not None:
            t = self.temperature
            return 1.0, 1.0 / (2.0 * (1.0 + t**2) ** 2), 1.0 - t**4
        return self.gamma, self.alpha, self.beta


class SourceSpec(StrictModel):
    kind: Literal["zero", "constant", "random"] = "zero"
    value: float = 0.0
    amplitude: float = 1.0
    seed: int = 0


class SolverSpec(StrictModel):
    newton_tol: float = Field(default=1e-10, gt=0)
    max_iters: int = Field(default=100, ge=1)
    classify_tol: float | None = None
    gap_tol: float = Field(default=1e-8, gt=0)
    fd_eps: float = Field(default=1e-5, gt=0)
    symmetry_tol: float = Field(default=1e-6, gt=0)
    sampler_budget: int = Field(default=64, ge=1)
    n_samples: int = Field(default=200, ge=1)


class ComplexSpec(StrictModel):
    cells: int = Field(default=8, ge=5)
    extent: float = Field(default=1.0, gt=0)
    inner: tuple[float, float] = (0.25, 0.75)
    scheme: Literal["forward", "link"] = "forward"
    refinements: list[int] = Field(default_factory=lambda: [8, 16, 32, 64])


class ExperimentSpec(StrictModel):
    name: str
    start: Literal["zero", "plus_bump", "minus_bump", "random", "constant"] = "zero"
    start_value: float = 0.0
    cases: list[TheoremCase | Literal["auto"]] = Field(default_factory=list)
    checks: list[str] = Field(default_factory=list)
    parameters: dict[str, Any] = Field(default_factory=dict)
    source: dict[str, Any] = Field(default_factory=dict)


class ExperimentConfig(StrictModel):
    schema_version: int
    name: str
    kind: Literal["scalar", "complex"] = "scalar"
    seed: int = 0
    output: Path | None = None
    grid: GridSpec | None = None
    parameters: ParameterSpec = Field(default_factory=ParameterSpec)
    source: SourceSpec = Field(default_factory=SourceSpec)
    solver: SolverSpec = Field(default_factory=SolverSpec)
    complex: ComplexSpec | None = None
    experiments: list[ExperimentSpec] = Field(min_length=1)

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentConfig":
        if self.schema_version != CONFIG_SCHEMA_VERSION:
            raise ValueError(
                f"unsupported schema_version {self.schema_version} "
                f"(expected {CONFIG_SCHEMA_VERSION})"
            )
        if self.kind == "scalar" and self.grid is None:
            raise ValueError("scalar configs need a [grid] table")
        allowed = SCALAR_CHECKS if self.kind == "scalar" else COMPLEX_CHECKS
        names = [e.name for e in self.experiments]
        if len(set(names)) != len(names):
            raise ValueError("experiment names must be unique")
        for exp in self.experiments:
            unknown = sorted(set(exp.checks) - allowed)
            if unknown:
                raise ValueError(f"experiment {exp.name!r}: unknown {self.kind} checks {unknown}")
            if self.kind == "complex" and exp.cases:
                raise ValueError(f"experiment {exp.name!r}: theorem cases are scalar-only")
            try:
                self.parameters_for(exp)
                self.source_for(exp)
            except ValidationError as exc:
                detail = "; ".join(_format_validation(exc))
                raise ValueError(f"experiment {exp.name!r} overrides: {detail}") from exc
        return self

    def parameters_for(self, exp: ExperimentSpec) -> ParameterSpec:
        return ParameterSpec.model_validate({**self.parameters.model_dump(), **exp.parameters})

    def source_for(self, exp: ExperimentSpec) -> SourceSpec:
        return SourceSpec.model_validate({**self.source.model_dump(), **exp.source})

    def complex_spec(self) -> ComplexSpec:
        return self.complex or ComplexSpec()

    def with_parameter(self, name: str, value: float) -> "ExperimentConfig":
        """Copy with one base parameter replaced (used by sweeps)."""
        if name not in ParameterSpec.model_fields:
            raise ConfigError(f"unknown parameter {name!r}")
        data = self.model_dump()
        data["parameters"][name] = value
        for exp in data["experiments"]:
            exp["parameters"].pop(name, None)
        return validate_config(data)


def _format_validation(exc: ValidationError) -> list[str]:
    return [
        f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}"
        for err in exc.errors()
    ]


def validate_config(data: dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError("invalid experiment config", _format_validation(exc)) from exc


def load_config(path: Path | str) -> ExperimentConfig:
    """
    Parse and validate a TOML experiment file.

    Raises:
        ConfigError: unreadable file, TOML syntax error (the diagnostic names the
            line and column) or schema violation (the diagnostic names the keys).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}", [str(exc)]) from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}", [str(exc)]) from exc
    return validate_config(data)

"""Exception hierarchy for gl-duality.

Every failure raised by the library derives from ``GLDualityError`` so callers
(and the CLI exit-code mapping) can catch the whole family at once.
"""

from typing import Any


class GLDualityError(Exception):
    """Base class for all library errors."""


class GridMismatchError(GLDualityError):
    """A field does not live on the grid it was paired with."""


class PreconditionError(GLDualityError):
    """An operation was called outside its documented precondition."""


class SolverError(GLDualityError):
    """A numerical solver could not produce a certified answer."""


class ConvergenceError(SolverError):
    """Iteration cap reached before the tolerance was met."""

    def __init__(self, message: str, residual: float, iterate: Any = None):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual
        self.iterate = iterate


class IndefiniteOperatorError(SolverError):
    """An operator assumed positive definite turned out not to be."""

    def __init__(self, message: str, precondition: str = "operator must be positive definite"):
        super().__init__(f"{message}: {precondition}")
        self.precondition = precondition


class DomainError(GLDualityError):
    """A dual variable left the domain of a closed-form conjugate."""

    def __init__(self, message: str, node: int, margin: float):
        super().__init__(f"{message} (worst node {node}, margin {margin:.3e})")
        self.node = node
        self.margin = margin


class HypothesisMismatchError(GLDualityError):
    """The requested theorem case does not apply to the given point."""

    def __init__(self, case: str, flag: str):
        super().__init__(f"hypothesis of {case} fails: {flag}")
        self.case = case
        self.flag = flag


class ConfigError(GLDualityError):
    """An experiment configuration could not be parsed or validated."""

    def __init__(self, message: str, diagnostics: list[str] | None = None):
        self.diagnostics = diagnostics or []
        detail = "; ".join(self.diagnostics)
        super().__init__(f"{message}: {detail}" if detail else message)

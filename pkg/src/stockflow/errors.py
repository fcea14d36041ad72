"""Exception hierarchy shared by the whole package.

Builders raise on the first violation; `validate` collects all of them
into a report instead (see `stockflow.core.validate`).
"""

from __future__ import annotations


class StockFlowError(Exception):
    """Base class for every error raised by this package."""


# --- structural / build-time errors ---------------------------------------


class ValidationError(StockFlowError):
    """A diagram, morphism, pattern, or scenario violates an invariant."""


class DuplicateName(ValidationError):
    pass


class UnknownReference(ValidationError):
    pass


class ArityMismatch(ValidationError):
    pass


class MissingFlowFunction(ValidationError):
    pass


class DuplicateUpstream(ValidationError):
    pass


class DuplicateDownstream(ValidationError):
    pass


class DanglingFlow(ValidationError):
    pass


class IllFormedPartition(ValidationError):
    pass


class DomainMismatch(ValidationError):
    pass


class FootMismatch(ValidationError):
    pass


class NameCollision(ValidationError):
    pass


class InconsistentFoot(ValidationError):
    pass


class PortCountMismatch(ValidationError):
    pass


class JunctionFootMismatch(ValidationError):
    pass


class SizeLimitExceeded(StockFlowError):
    pass


class AmbiguousName(ValidationError):
    pass


class DiagramMismatch(ValidationError):
    pass


class ScenarioError(ValidationError):
    pass


class UnknownModel(StockFlowError):
    pass


# --- expression evaluation ------------------------------------------------


class EvalError(StockFlowError):
    """Raised while evaluating an expression.

    `context` is filled in by callers that know which flow or variable the
    expression belongs to; the original message stays intact.
    """

    def __init__(self, message: str):
        super().__init__(message)
        self.context: str | None = None

    def __str__(self) -> str:
        base = super().__str__()
        if self.context:
            return f"{self.context}: {base}"
        return base


class UnknownParameter(EvalError):
    def __init__(self, message: str, name: str | None = None):
        super().__init__(message)
        self.name = name


# alias: simulation-facing callers know the same failure by this name
UnboundParameter = UnknownParameter


class DivisionByZero(EvalError):
    pass


class DomainError(EvalError):
    pass


# --- expression parsing ---------------------------------------------------


class ExpressionSyntaxError(StockFlowError):
    """Bad expression text; `position` is the 0-based column of the error."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (column {position + 1})")
        self.position = position


# --- files ----------------------------------------------------------------


class SchemaViolation(StockFlowError):
    """A model file does not match its declared kind; `path` is a JSON pointer."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path


class VersionMismatch(StockFlowError):
    pass


# --- simulation -----------------------------------------------------------


class NonFiniteState(StockFlowError):
    def __init__(self, message: str, step: int | None = None, stock: str | None = None):
        super().__init__(message)
        self.step = step
        self.stock = stock

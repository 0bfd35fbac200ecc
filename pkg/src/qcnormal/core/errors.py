"""Exception hierarchy for qcnormal."""

from typing import Any, Optional


class QCNormalError(Exception):
    """Base class for every error raised by the library."""


class ConfigError(QCNormalError):
    """Invalid run configuration (dimension, suite name, order...)."""


class TensorShapeError(QCNormalError):
    """Axis kinds or extents do not match for the requested operation."""


class InvariantViolation(QCNormalError):
    """An input object breaks one of its declared invariants."""


class MissingJetError(QCNormalError):
    """A derivative jet or tensor block needed by an operation is absent."""


class PreconditionError(QCNormalError):
    """Inputs are well formed but violate an operation's precondition."""


class SingularSystemError(QCNormalError):
    """A linear system that must be invertible turned out singular."""


class IntegrationError(QCNormalError):
    """ODE integration failed (step underflow, tolerance not met, blow-up)."""

    def __init__(self, message: str, diagnostics: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NewtonDivergence(QCNormalError):
    """Newton iteration for the parabolic log did not converge."""


class SingularJacobian(QCNormalError):
    """Finite-difference Jacobian of the exponential map is not invertible."""


class StabilityViolation(QCNormalError):
    """A jet oracle changed entries of order lower than the current step."""


class FormatError(QCNormalError):
    """Malformed JSON input."""

    def __init__(self, message: str, line: int = 0, column: int = 0) -> None:
        if line:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column

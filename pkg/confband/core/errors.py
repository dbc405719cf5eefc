"""
confband Errors
Exception hierarchy with machine-parsable codes and CLI exit codes
"""
from typing import Any, Dict


class ConformalError(Exception):
    """Base exception for every confband failure."""

    exit_code = 1

    def __init__(self, message: str = "", **context: Any):
        self.message = message
        self.context: Dict[str, Any] = dict(context)
        super().__init__(self._render())

    @property
    def code(self) -> str:
        return type(self).__name__

    def _render(self) -> str:
        if not self.context:
            return self.message
        ctx = ", ".join(f"{k}={v}" for k, v in sorted(self.context.items()))
        return f"{self.message} [{ctx}]"

    def with_context(self, **context: Any) -> "ConformalError":
        """Attach extra context (e.g. the evaluation fold) and refresh the message."""
        self.context.update(context)
        self.args = (self._render(),)
        return self

    def cli_line(self) -> str:
        return f"{self.code}: {self._render()}"


# === Usage errors (exit 2) ===

class UsageError(ConformalError):
    exit_code = 2


class BadAlpha(UsageError):
    pass


class BadRho(UsageError):
    pass


class BadExplicit(UsageError):
    pass


class BadLambda(UsageError):
    pass


class BadTau(UsageError):
    pass


class BadInnerAlpha(UsageError):
    pass


class BadLevel(UsageError):
    pass


class BadConfig(UsageError):
    pass


class UnsupportedResult(UsageError):
    pass


class ModelMismatch(UsageError):
    """A ModelFit was handed to the predict of a different ModelSpec."""
    pass


# === Data errors (exit 3) ===

class DataError(ConformalError):
    exit_code = 3


class DimensionMismatch(DataError):
    pass


class NonFinite(DataError):
    pass


class TooFewRows(DataError):
    pass


class GridMismatch(DataError):
    pass


class EmptyTraining(DataError):
    pass


class EmptyCalibration(DataError):
    pass


class EmptySet(DataError):
    pass


class TooFewResiduals(DataError):
    pass


class ParseError(DataError):
    pass


class MissingColumn(DataError):
    pass


class SchemaError(DataError):
    pass


# === Numeric errors (exit 4) ===

class NumericError(ConformalError):
    exit_code = 4


class GridExplosion(NumericError):
    pass


class NonPositiveModulation(NumericError):
    pass


class MissingCovariance(NumericError):
    pass


def check_alpha(alpha: float, name: str = "alpha") -> float:
    """Reject miscoverage levels outside the open unit interval."""
    if not (0.0 < float(alpha) < 1.0):
        raise BadAlpha(f"{name} must lie in (0, 1), got {alpha}")
    return float(alpha)

"""Exception hierarchy shared across the package."""


class TrajAdaptError(Exception):
    """Base class for all package errors."""


class SchemaError(TrajAdaptError, ValueError):
    """A model, scenario or task file does not match its documented schema."""


class ModelValidationError(SchemaError):
    """A robot model parsed correctly but is physically inconsistent."""


class DimensionError(TrajAdaptError, ValueError):
    """Array shapes do not agree with the model / trajectory dimensions."""


class DerivativeError(TrajAdaptError, FloatingPointError):
    """A derivative evaluation produced a non-finite value.

    ``waypoint`` names the offending waypoint index when known.
    """

    def __init__(self, message, waypoint=None):
        super().__init__(message)
        self.waypoint = waypoint


class SingularityError(TrajAdaptError, ArithmeticError):
    """The damped Hessian could not be solved against the mixed Jacobian."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class BenchmarkError(TrajAdaptError, RuntimeError):
    """A benchmark run failed as a whole (too many failed trials)."""

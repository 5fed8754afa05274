"""Exception types raised across the package."""


class LadderError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(LadderError, ValueError):
    pass


class CapacityError(LadderError, MemoryError):
    pass


class SectorViolationError(LadderError, ValueError):
    pass


class DimensionError(LadderError, ValueError):
    pass


class ParameterError(LadderError, ValueError):
    pass


class DomainError(LadderError, ValueError):
    pass


class ConvergenceError(LadderError, RuntimeError):
    """Iterative method hit its cap; ``bracket`` holds the best estimate so far."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class EmptyProjectionError(LadderError, ValueError):
    pass


class UnreachableTargetError(LadderError, ValueError):
    pass


class UnnormalizedStateError(LadderError, ValueError):
    pass


class NumericalConsistencyError(LadderError, ArithmeticError):
    pass


class FitError(LadderError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotEquilibratedError(LadderError, RuntimeError):
    pass


class InsufficientOverlapError(LadderError, ValueError):
    pass


class SchemaError(LadderError, ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path

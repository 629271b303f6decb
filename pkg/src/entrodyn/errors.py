"""Exception types shared across the package."""


class EntrodynError(Exception):
    """Base class for all package errors."""


class DomainError(EntrodynError):
    """A point left the admissible coordinate domain.

    Carries the offending particle and axis indices when known, so callers
    can report which coordinate violated its bounds or singular margin.
    """

    def __init__(self, message, particle=None, axis=None):
        super().__init__(message)
        self.particle = particle
        self.axis = axis


class ConditioningError(EntrodynError):
    """A metric block was numerically singular or not positive-definite."""

    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class StepSizeError(EntrodynError):
    """A stability (CFL-type) bound was violated; carries a suggested dt."""

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class SolverError(EntrodynError):
    """An iterative linear solve failed to reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(EntrodynError):
    """A run configuration failed to parse or validate; names the field."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class SnapshotError(EntrodynError):
    """A snapshot file is malformed or inconsistent with its header."""

"""Exception hierarchy shared by all modules."""


class LRWaveError(Exception):
    """Base class for every error raised by the package."""


class DomainError(LRWaveError, ValueError):
    """Input outside the domain of an operation (non-finite values, trapped start, ...)."""


class PreconditionError(LRWaveError, ValueError):
    """A documented precondition of an operation does not hold."""


class UnsupportedOrderError(LRWaveError):
    """A derivative of higher order than the closed forms provide was requested."""


class UnsupportedDimensionError(LRWaveError):
    pass


class IntegrationError(LRWaveError):
    """The ODE integrator failed; ``last_time`` is the last successfully reached time."""

    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time


class DivergenceError(IntegrationError):
    pass


class InversionError(LRWaveError):
    """Newton inversion of the Lambda map did not converge."""

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class ConvergenceError(LRWaveError):
    """A lambda ladder failed to behave like a Cauchy sequence."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class RangeError(LRWaveError, ValueError):
    """Requested evaluation outside the validity window of a construction."""


class BoundaryMassError(LRWaveError):
    """Wave mass reached the edge of the periodic grid."""

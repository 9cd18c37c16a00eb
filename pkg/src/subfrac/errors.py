"""Exception types shared across the package."""


class SubfracError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SubfracError, ValueError):
    """Invalid grid, mode, parameter, or option combination."""


class GridMismatchError(SubfracError, ValueError):
    """Operands live on different grids."""


class CapacityError(SubfracError, RuntimeError):
    """Problem size exceeds the dense-path limit; use a smaller grid."""


class AccuracyError(SubfracError, RuntimeError):
    """A quadrature failed to converge; carries the last error estimate."""

    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (last error estimate {estimate:.3e})")
        self.estimate = estimate


class EvaluationError(SubfracError, ValueError):
    """A spectral multiplier produced a non-finite value."""

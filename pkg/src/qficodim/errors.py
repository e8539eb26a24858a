"""Exception types shared across the package."""


class AtCriticalityError(ValueError):
    """Raised when a quantity is requested exactly at (or numerically at) a gap closing."""


class ConvergenceError(RuntimeError):
    """A quadrature or grid refinement ran out of budget before reaching its tolerance.

    The best estimate and its error estimate are attached so callers can report them.
    """

    def __init__(self, message, value=None, error=None):
        super().__init__(message)
        self.value = value
        self.error = error


class NoiseFloorError(RuntimeError):
    """A scaling diagnostic is dominated by quadrature error rather than physics."""


class InsufficientDataError(ValueError):
    """Too few points, or too narrow a span of m, for the requested fit."""

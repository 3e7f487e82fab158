"""Exception types shared across the package."""


class BdsdeError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(BdsdeError, ValueError):
    """An argument violates a precondition (wrong sign, length, order...)."""


class InvalidModelError(BdsdeError, ValueError):
    """A problem specification violates the admissibility assumptions."""


class UnknownModelError(BdsdeError, KeyError):
    """Registry lookup for an unknown model key."""


class ResourceLimitError(BdsdeError, RuntimeError):
    """An exhaustive enumeration would exceed the configured hard cap."""


class StepTooCoarseError(BdsdeError, ValueError):
    """The time step is too coarse for the requested computation.

    ``minimal_n`` names the smallest step count that would be accepted.
    """

    def __init__(self, message, minimal_n=None):
        super().__init__(message)
        self.minimal_n = minimal_n


class NumericFailureError(BdsdeError, ArithmeticError):
    """A fixed-point inversion failed to converge; carries the node location."""

    def __init__(self, message, level=None, node=None, residual=None):
        super().__init__(message)
        self.level = level
        self.node = node
        self.residual = residual


class UnsupportedModelError(BdsdeError, ValueError):
    """The model is structurally outside what the solver supports."""


class DivergentSeriesError(BdsdeError, ValueError):
    """The requested series does not converge for these parameters."""


class EmptyReportError(BdsdeError, ValueError):
    """A statistics run was requested with zero samples."""

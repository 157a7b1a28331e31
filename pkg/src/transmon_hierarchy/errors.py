"""Exception types raised across the package."""


class TransmonError(Exception):
    """Base class for all package errors."""


class AmbiguousLabel(TransmonError):
    """A bare product state has no dominant dressed eigenvector."""


class NoConvergence(TransmonError):
    """An iterative search stopped without meeting its tolerance."""


class NegativeDiscriminant(TransmonError):
    """Dispersive-shift inversion produced a negative square-root argument."""


class StepFailure(TransmonError):
    """The adaptive integrator could not meet tolerance at the minimum step."""


class NoCrossing(TransmonError):
    """A scanned population never reaches the requested target value."""


class WindowTooNarrow(TransmonError):
    """The optimum of a frequency scan sits on the edge of the window."""


class DegenerateTrajectory(TransmonError):
    """A trajectory whose start and end points coincide."""


class InsufficientEndpoints(TransmonError):
    """Too few converged endpoints for cloud statistics."""


class ConfigError(TransmonError):
    """Invalid run configuration; message names the offending field."""


class TimerResolutionError(TransmonError):
    """Benchmark runs are too short for the wall clock to resolve."""

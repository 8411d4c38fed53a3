"""Exception types shared across the package."""


class NullGeoError(Exception):
    """Base class for all package-specific errors."""


class DomainError(NullGeoError):
    """A chart point lies outside the metric's domain."""


class DegenerateInputError(NullGeoError):
    """An input is degenerate (zero covector, vanishing direction, ...)."""


class ConfigError(NullGeoError):
    """A configuration file or scenario config is invalid."""


class TruncationError(NullGeoError):
    """A flow left the chart domain or entered an excluded set.

    Carries the parameter at which the trajectory stopped and the reason.
    """

    def __init__(self, message, exit_parameter, reason):
        super().__init__(message)
        self.exit_parameter = float(exit_parameter)
        self.reason = reason


class DistanceUncertainError(NullGeoError):
    """The distance search failed to certify a minimizer.

    ``lower`` and ``upper`` bracket the true distance as far as it is known.
    """

    def __init__(self, message, lower, upper):
        super().__init__(message)
        self.lower = float(lower)
        self.upper = float(upper)


class ClassificationUncertainError(NullGeoError):
    """Turning-point search or trace evidence failed for a geodesic."""


class FrameError(NullGeoError):
    """A transported frame degenerated along a geodesic."""


class ResolutionError(NullGeoError):
    """A grid oracle request exceeds the resolution or memory budget."""


class ProtocolError(NullGeoError):
    """A sequence generator violated its declared contract."""

"""Exception types raised by the estimation library."""


class EstimationError(Exception):
    """Base class for all library errors."""


class NonSkewInput(EstimationError, ValueError):
    """A matrix passed to ``vee`` is not skew-symmetric."""


class OverflowGuard(EstimationError, ValueError):
    """Concentration parameters exceed the supported range."""


class NonAttainableMoment(EstimationError, ValueError):
    """A moment matrix lies outside the image of the matrix Fisher moment map."""


class NoConvergence(EstimationError, RuntimeError):
    """An iterative solver hit its iteration cap."""


class EfficiencyGuard(EstimationError, ValueError):
    """Rejection sampling would be too inefficient for the requested distribution."""


class DegenerateMode(EstimationError, ValueError):
    """The mode of a matrix Fisher distribution is not unique."""


class IncompatibleNoiseModel(EstimationError, TypeError):
    """A measurement carries a noise model the operation cannot handle."""


class CollinearReferences(EstimationError, ValueError):
    """Reference directions do not determine an attitude."""


class ZeroMean(EstimationError, ValueError):
    """A Gaussian mean vector is (numerically) zero."""


class SingularInnovation(EstimationError, ValueError):
    """Kalman innovation covariance is numerically singular."""


class ConfigError(EstimationError, ValueError):
    """Invalid scenario configuration."""

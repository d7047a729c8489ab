"""Exception hierarchy shared by all adabatch modules."""


class AdaBatchError(Exception):
    """Base class for every error raised by this package."""


class DegenerateGradient(AdaBatchError):
    """The reference gradient is too small for a direction to be defined."""


class DimensionMismatch(AdaBatchError, ValueError):
    pass


class ConvergenceFailure(AdaBatchError):
    pass


class SingularMatrix(AdaBatchError):
    pass


class ZeroTolerance(AdaBatchError, ValueError):
    """A zero tolerance was paired with a nonzero variance contribution."""


class ZeroCovariance(AdaBatchError):
    """The covariance has zero trace, so the optimal split is 0/0."""


class InvalidSmoothness(AdaBatchError, ValueError):
    pass


class ConfigError(AdaBatchError, ValueError):
    pass

"""Exception hierarchy shared by all rfock modules."""


class RFockError(Exception):
    """Base class for every error raised by rfock."""


class DegenerateLoop(RFockError, ValueError):
    pass


class NegativeDistance(RFockError, ValueError):
    pass


class QuadratureNonConvergence(RFockError, RuntimeError):
    pass


class NotPositiveSemidefinite(RFockError, ValueError):
    pass


class CholeskyFailure(RFockError, ValueError):
    pass


class SingularCovariance(RFockError, ValueError):
    pass


class HoopNotInFamilySpan(RFockError, ValueError):
    pass


class DimensionMismatch(RFockError, ValueError):
    pass


class FamilyNotDecorrelated(RFockError, ValueError):
    pass


class ConfigError(RFockError, ValueError):
    """Invalid user input; ``field`` names the offending config key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field

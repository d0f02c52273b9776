"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes do not conform."""


class SingularMatrixError(ArithmeticError):
    """A pivot fell below the relative singularity threshold.

    ``block`` names the sub-block that failed when the error comes from a
    partitioned inversion (``"A4"`` or ``"schur"``), otherwise ``None``.
    """

    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class ConvergenceError(ArithmeticError):
    """A truncated power series was found to diverge."""


class ConditioningError(ArithmeticError):
    """A detector could not build a numerically usable covariance."""


class ConfigError(ValueError):
    """Invalid simulation or CLI configuration.

    ``key`` is the dotted configuration key at fault, when known.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key

class ConfigurationError(ValueError):
    """Inconsistent shapes, invalid hyperparameters or malformed config files."""


class NumericError(ArithmeticError):
    """A non-finite value appeared during evaluation or training."""

    def __init__(self, message, index=None, trace=None):
        super().__init__(message)
        self.index = index
        self.trace = trace


class SingularSystemError(NumericError):
    """The regularized lower-level system could not be factorized."""

    def __init__(self, message, min_pivot=None):
        super().__init__(message)
        self.min_pivot = min_pivot


class DivergenceError(NumericError):
    """An iterative solver blew up; ``trace`` carries the loss history."""


class UndefinedMetricError(ValueError):
    """A metric is undefined for its inputs (e.g. zero reference norm)."""

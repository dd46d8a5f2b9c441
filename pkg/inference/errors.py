"""Exception hierarchy shared by the inference, experiment and CLI layers."""


class ClusterInferenceError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 3


class ConfigError(ClusterInferenceError, ValueError):
    """Invalid parameters, unknown names or an inconsistent configuration."""

    exit_code = 2


class DataParseError(ConfigError):
    """A CSV cell could not be read as a finite number, or a row is ragged."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class DimensionError(ConfigError):
    """Sizes that the procedures cannot work with (n < 3, K out of range, ...)."""


class DegenerateDataError(ClusterInferenceError):
    """A norm or variance that must be positive is (numerically) zero."""


class InsufficientDegreesOfFreedomError(DegenerateDataError):
    """Fewer than three points in the two clusters under test."""


class EmptyTruncationError(ClusterInferenceError):
    """The truncation set is empty or carries no probability mass."""


class EstimationFailureError(ClusterInferenceError):
    """Importance sampling produced no draws inside the truncation set."""


class NumericError(ClusterInferenceError):
    """A computation left the range where double precision is meaningful."""


class InternalConsistencyError(ClusterInferenceError):
    """The membership oracle rejected the observed statistic."""


class UndefinedPowerError(ClusterInferenceError):
    """Empirical power requested with no null-false trials."""

"""Exception hierarchy shared across the package.

Exit codes used by the CLI: 2 configuration, 3 data, 4 training/solver
failure, 5 degenerate statistics.
"""


class DayaheadError(Exception):
    exit_code = 1


class ConfigError(DayaheadError):
    """Invalid configuration: bad sizes, unknown options, impossible splits."""

    exit_code = 2


class ShapeError(ConfigError):
    """Array dimensions do not compose."""


class RegistryError(ConfigError):
    """Unknown model id."""


class FeasibilityError(ConfigError):
    """Request is computationally infeasible (e.g. exact enumeration too large)."""


class DataError(DayaheadError):
    exit_code = 3


class ParseError(DataError):
    """Malformed CSV content; carries the 1-based line number."""

    def __init__(self, message, line_no=None):
        super().__init__(message if line_no is None else f"line {line_no}: {message}")
        self.line_no = line_no


class OrderingError(DataError):
    """Timestamps out of order or duplicated where not allowed."""


class SchemaError(DataError):
    """Column set does not match the declared schema."""


class IncompleteSeriesError(DataError):
    """Missing values at the start or end of a series cannot be interpolated."""


class IncompleteDayError(DataError):
    """An hourly day does not have exactly 24 rows."""


class TrainingFailure(DayaheadError):
    """Training diverged; carries the epoch at which the loss became non-finite."""

    exit_code = 4

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class SolverError(DayaheadError):
    """An iterative solver hit its cap; carries the remaining residual."""

    exit_code = 4

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateStatisticsError(DayaheadError):
    """A statistic is undefined on the given input (zero variance, zero actuals)."""

    exit_code = 5


class UndefinedMetricError(DegenerateStatisticsError):
    """MAPE/SMAPE undefined because of zero denominators."""

"""Exception hierarchy.

Each top-level family maps to one CLI exit code: configuration problems
exit with 2, bad input data with 3, broken internal invariants with 4.
"""


class MoocSDError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1
    stage = "pipeline"


class ConfigError(MoocSDError, ValueError):
    exit_code = 2
    stage = "config"


class SpecError(ConfigError):
    """Invalid discretizer specification (unordered cuts, label count mismatch)."""


class DataError(MoocSDError, ValueError):
    exit_code = 3
    stage = "data"


class SchemaError(DataError):
    """A mandatory column is missing from an input table."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"missing mandatory column: {column}")


class ParseError(DataError):
    """A cell could not be parsed; ``row`` is the 0-based data row index."""

    def __init__(self, row, column, value, reason):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}, column {column!r}: {reason} (value {value!r})")


class InvalidRecordError(DataError):
    """A record violates a domain rule, e.g. a row that is not a registrant."""

    def __init__(self, row, reason):
        self.row = row
        super().__init__(f"row {row}: {reason}")


class FitError(DataError):
    """A discretizer could not be fitted for an attribute (no usable values)."""

    def __init__(self, attribute, reason="no non-missing values"):
        self.attribute = attribute
        super().__init__(f"cannot fit {attribute!r}: {reason}")


class UndefinedMeasureError(DataError):
    """A quality measure has a zero denominator."""


class InvariantError(MoocSDError, AssertionError):
    exit_code = 4
    stage = "invariant"


class RoutingError(InvariantError):
    """A shard instance was delivered to the wrong shard."""


class EngineMismatchError(InvariantError):
    """Single-worker and multi-worker engines disagreed."""

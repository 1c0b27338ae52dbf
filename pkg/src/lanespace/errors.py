"""Exception hierarchy shared across the package.

ValidationError subclasses signal bad inputs (CLI exit code 2); everything
else under LanespaceError is a runtime failure (exit code 1).
"""


class LanespaceError(Exception):
    """Base class for all package errors."""


class ValidationError(LanespaceError):
    """Invalid input data or arguments."""


class InvalidAnnotation(ValidationError):
    """Polyline annotation too short or degenerate to resample."""


class GridMismatch(ValidationError):
    """Operation mixed lanes or bases from different sampling grids."""


class DimensionMismatch(ValidationError):
    """Coefficient vector length does not match the basis rank."""


class RankDeficient(ValidationError):
    """Requested rank exceeds the numerical rank of the lane matrix."""

    def __init__(self, requested: int, achievable: int):
        super().__init__(
            f"requested rank {requested} exceeds numerical rank {achievable}"
        )
        self.requested = requested
        self.achievable = achievable


class TooManyClusters(ValidationError):
    """k exceeds the number of distinct points available for clustering."""


class TooManyNodes(ValidationError):
    """Graph too large for exact clique enumeration."""


class EmptyInput(ValidationError):
    """Operation received an empty collection where one or more items are required."""


class ParseError(ValidationError):
    """Malformed dataset file."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class SchemaError(ValidationError):
    """File content does not match the expected schema."""


class VersionError(ValidationError):
    """Serialized file carries an unsupported schema version."""


class IoError(LanespaceError):
    """Filesystem read/write failure."""

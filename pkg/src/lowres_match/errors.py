"""Exception hierarchy shared across the package."""


class LowresMatchError(Exception):
    """Base class for all errors raised by this package."""


class InvalidCoordinate(LowresMatchError):
    """Geographic coordinate outside the valid lon/lat range."""


class DegenerateGeometry(LowresMatchError):
    """Zero-length segment or duplicate consecutive points where forbidden."""


class SchemaError(LowresMatchError):
    """Input file violates the documented schema.

    Carries the offending row (1-based, header excluded) when known.
    """

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)


class EmptyNetwork(LowresMatchError):
    """Operation requires at least one street node."""


class EmptyRun(LowresMatchError):
    """Analytics requested over a run with no matched segments."""


class IoError(LowresMatchError):
    """Output destination could not be written."""

"""Exception types shared across the package."""


class DetourlabError(Exception):
    """Base class for all library errors."""


class InputError(DetourlabError):
    """Invalid argument, malformed structure, or failed validation."""


class NoRouteError(DetourlabError):
    """Destination segment is unreachable from the origin segment."""


class MatchError(DetourlabError):
    """Map matching failed; ``point_index`` locates the offending GPS point."""

    def __init__(self, message: str, point_index: int | None = None):
        super().__init__(message)
        self.point_index = point_index


class FitError(DetourlabError):
    """Model fitting or evaluation is undefined for the given data."""


class DataFormatError(DetourlabError):
    """A persisted file is malformed; ``line`` locates the bad record."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line

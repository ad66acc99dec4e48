"""Exception types shared across the package."""


class PageFlipError(Exception):
    """Base class for all pageflip errors."""


class BadConfig(PageFlipError):
    """A configuration value violates its documented constraints."""


class NoInk(PageFlipError):
    """The page contains no foreground pixels to analyze."""


class ParseError(PageFlipError):
    """A trace or config file could not be parsed.

    Carries the 1-based line number of the offending record.
    """

    def __init__(self, line_no: int, message: str = ""):
        self.line_no = line_no
        detail = f": {message}" if message else ""
        super().__init__(f"parse error at line {line_no}{detail}")


class NonMonotonicTrace(PageFlipError):
    """Trace timestamps must be strictly increasing."""

    def __init__(self, line_no: int):
        self.line_no = line_no
        super().__init__(f"non-monotonic timestamp at line {line_no}")


class DeviceError(PageFlipError):
    """Base class for page-turner device failures."""


class DeviceTimeout(DeviceError):
    """The device did not acknowledge a command in time."""


class DeviceIo(DeviceError):
    """The device byte stream failed (open/read/write error or EOF)."""


class LogMismatch(PageFlipError):
    """A session log references pages the oracle does not cover."""

"""Exception types shared across the package."""


class SkeceError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SkeceError, ValueError):
    """Invalid parameter or configuration value."""


class TraceFormatError(SkeceError, ValueError):
    """A trace file violates the CSV trace format.

    Carries the offending 1-based line number when one can be named.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DesyncError(SkeceError, RuntimeError):
    """The two parties' shared state diverged (drop lists, plans, positions)."""


class WireFormatError(SkeceError, ValueError):
    """A wire frame or payload cannot be encoded or decoded."""


class ProtocolError(SkeceError, RuntimeError):
    """Parameter disagreement or an illegal protocol state."""


class InsufficientBitsError(SkeceError, RuntimeError):
    """Not enough extracted bits to build a key of the requested length."""

"""Exception types shared across the toolkit.

``ArgumentError``/``ValidationError``/``FormatError`` all signal bad inputs
and map to the CLI usage exit code; anything else is a runtime failure.
"""


class TokselectError(Exception):
    """Base class for all toolkit errors."""


class ArgumentError(TokselectError):
    """A caller passed an argument that violates an operation's contract."""


class ValidationError(TokselectError):
    """Data failed an invariant check (duplicate ids, out-of-range tokens, ...)."""


class FormatError(TokselectError):
    """A file on disk is malformed. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(TokselectError):
    """A configuration file or pipeline configuration is invalid."""

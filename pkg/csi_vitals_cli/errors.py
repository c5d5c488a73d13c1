"""Exception hierarchy for CSI Vitals CLI."""
from typing import Optional


class VitalsError(Exception):
    """Base class for every error raised by csi_vitals_cli."""
    pass


class ValidationError(VitalsError, ValueError):
    """Raised when parameters, scenarios or configuration values are invalid."""
    pass


class ScenarioConfigError(ValidationError):
    """Raised when a scenario config file cannot be parsed or validated."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(ValidationError):
    """Raised when a JSON document does not match its schema."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class TraceFormatError(VitalsError):
    """Raised when a binary trace file is malformed."""
    pass


class BadMagicError(TraceFormatError):
    pass


class VersionMismatchError(TraceFormatError):
    pass


class TruncatedPayloadError(TraceFormatError):
    pass


class ShapeOverflowError(TraceFormatError):
    pass


class InvariantError(VitalsError):
    """Raised when an internal invariant is breached."""
    pass

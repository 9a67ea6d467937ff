"""
Exception hierarchy for the simulator.

Every error carries a human-readable message, a machine-readable error
code and a details mapping, so the CLI and the HTTP layer can report
failures without parsing strings.
"""

from typing import Optional, Dict, Any, List


class BQMLError(Exception):
    """Base class for all simulator errors."""

    def __init__(
        self,
        message: str = "Simulation failed",
        details: Optional[Dict[str, Any]] = None,
        error_code: Optional[str] = None
    ) -> None:
        self.message = message
        self.details = details or {}
        self.error_code = error_code or "BQML_ERROR"
        super().__init__(self.message)


class InvalidArgumentError(BQMLError, ValueError):
    """
    Raised when an operation is called outside its preconditions.

    Covers duplicate or unknown qubit labels, non-unitary matrices,
    non-normalized rotation parameters and negative magnitudes.
    """

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(
            message=message,
            details=details,
            error_code="INVALID_ARGUMENT"
        )


class ConfigurationError(BQMLError):
    """
    Raised when a session or experiment configuration is invalid.

    All violations found are reported together in ``violations``.
    """

    def __init__(self, message: str = "Invalid configuration", violations: Optional[List[str]] = None) -> None:
        self.violations = violations or []
        super().__init__(
            message=message,
            details={"violations": self.violations},
            error_code="CONFIGURATION_ERROR"
        )


class ConfigParseError(ConfigurationError):
    """Raised when a configuration file cannot be parsed at all."""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None) -> None:
        self.line = line
        self.key = key
        location = []
        if line is not None:
            location.append(f"line {line}")
        if key is not None:
            location.append(f"key '{key}'")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(message=f"{message}{suffix}", violations=[f"{message}{suffix}"])
        self.error_code = "CONFIG_PARSE_ERROR"
        self.details.update({"line": line, "key": key})


class ProtocolError(BQMLError):
    """Raised when a protocol step is executed out of order or reuses a pair."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(
            message=message,
            details=details,
            error_code="PROTOCOL_ERROR"
        )


class InsufficientDataError(BQMLError):
    """Raised when an estimate is requested without any usable trial."""

    def __init__(self, message: str = "No Diagonal-control trials available") -> None:
        super().__init__(message=message, error_code="INSUFFICIENT_DATA")


class ReportIOError(BQMLError):
    """Raised when a report file cannot be written."""

    def __init__(self, message: str, path: str) -> None:
        self.path = path
        super().__init__(
            message=f"{message}: {path}",
            details={"path": path},
            error_code="REPORT_IO_ERROR"
        )

"""Error hierarchy. Every error renders to a machine-readable record."""

from typing import Any, Dict, List, Optional


class SelectiveActingError(Exception):
    """Base class for all toolkit errors"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_record(self) -> Dict[str, Any]:
        return {
            "success": False,
            "error": {
                "type": type(self).__name__,
                "message": self.message,
                "details": self.details,
            },
        }


class ContractViolation(SelectiveActingError):
    """A bet or increment outside the range that keeps the e-process positive"""


class ReplayParseError(SelectiveActingError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}", {"line_number": line_number})
        self.line_number = line_number


class ReplayValidationError(SelectiveActingError):
    pass


class CalibrationError(SelectiveActingError):
    pass


class ConfigError(SelectiveActingError):
    pass


class UnknownPresetError(ConfigError):
    def __init__(self, name: str, available: List[str]):
        super().__init__(
            f"unknown preset '{name}'; available presets: {', '.join(available)}",
            {"preset": name, "available": list(available)},
        )
        self.available = list(available)


class EmptyAggregateError(SelectiveActingError):
    pass

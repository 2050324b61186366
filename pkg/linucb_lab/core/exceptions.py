"""
Error taxonomy shared by the library and the CLI
Each class maps onto one CLI exit code (see linucb_lab.main)
"""

from typing import Optional, Any


class LabError(Exception):
    """Base class for every error raised by linucb_lab"""


class InvalidArgumentError(LabError, ValueError):
    """A caller passed a value outside an operation's domain"""


class ModelInvalidError(LabError):
    """A linear MDP breaks one of its structural assumptions"""

    def __init__(self, message: str, report: Optional[Any] = None):
        super().__init__(message)
        self.report = report


class NumericFailureError(LabError, ArithmeticError):
    """Floating-point state could not be kept within tolerance"""


class SchemaError(LabError, ValueError):
    """A config or model document does not match its schema"""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class LemmaViolationError(LabError, AssertionError):
    """A deterministic inequality failed on a concrete path"""

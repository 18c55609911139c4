"""
Standardized exception hierarchy for the toolkit.
Provides clear, typed exceptions with proper error context and CLI exit codes.
"""
from typing import Optional, Dict, Any
from enum import Enum

EXIT_RUNTIME_FAILURE = 1
EXIT_USAGE_ERROR = 2


class ErrorCode(str, Enum):
    """Standardized error codes for the toolkit"""
    # Domain errors
    VALIDATION_ERROR = "VALIDATION_ERROR"
    PARAMETER_ERROR = "PARAMETER_ERROR"
    DIMENSION_MISMATCH = "DIMENSION_MISMATCH"
    UNDEFINED_RATIO = "UNDEFINED_RATIO"

    # Application errors
    ENUMERATION_TOO_LARGE = "ENUMERATION_TOO_LARGE"
    UNSUPPORTED_OPERATION = "UNSUPPORTED_OPERATION"
    TRAINING_DIVERGENCE = "TRAINING_DIVERGENCE"
    TRIAL_PROCESSING_ERROR = "TRIAL_PROCESSING_ERROR"

    # Infrastructure errors
    FILE_SYSTEM_ERROR = "FILE_SYSTEM_ERROR"
    CONFIGURATION_ERROR = "CONFIGURATION_ERROR"

    # Generic errors
    INTERNAL_ERROR = "INTERNAL_ERROR"


class ApplicationException(Exception):
    """Base exception for all toolkit-specific errors"""

    def __init__(
        self,
        message: str,
        error_code: ErrorCode = ErrorCode.INTERNAL_ERROR,
        context: Optional[Dict[str, Any]] = None,
        cause: Optional[Exception] = None,
        exit_code: int = EXIT_RUNTIME_FAILURE,
    ):
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.context = context or {}
        self.cause = cause
        self.exit_code = exit_code

    def to_dict(self) -> Dict[str, Any]:
        """Convert exception to dictionary for CLI error documents"""
        return {
            "error": True,
            "error_code": self.error_code.value,
            "message": self.message,
            "context": self.context,
        }


class DomainException(ApplicationException):
    """Exceptions from the domain layer"""
    pass


class ValidationException(DomainException):
    """Invalid values for a domain type"""

    def __init__(self, message: str, field: Optional[str] = None, value: Any = None):
        context = {}
        if field:
            context["field"] = field
        if value is not None:
            context["value"] = str(value)

        super().__init__(
            message=message,
            error_code=ErrorCode.VALIDATION_ERROR,
            context=context,
            exit_code=EXIT_USAGE_ERROR,
        )


class ParameterException(DomainException):
    """Infeasible parameter combinations (sparsity, spacing, tree size...)"""

    def __init__(self, message: str, parameter: Optional[str] = None, value: Any = None):
        context = {}
        if parameter:
            context["parameter"] = parameter
        if value is not None:
            context["value"] = str(value)

        super().__init__(
            message=message,
            error_code=ErrorCode.PARAMETER_ERROR,
            context=context,
            exit_code=EXIT_USAGE_ERROR,
        )


class DimensionMismatchException(DomainException):
    """Array shapes that do not fit together"""

    def __init__(self, message: str, expected: Any = None, actual: Any = None):
        context = {}
        if expected is not None:
            context["expected"] = str(expected)
        if actual is not None:
            context["actual"] = str(actual)

        super().__init__(
            message=message,
            error_code=ErrorCode.DIMENSION_MISMATCH,
            context=context,
            exit_code=EXIT_USAGE_ERROR,
        )


class UndefinedRatioException(DomainException):
    """Relative quantities requested for a zero reference signal"""

    def __init__(self, message: str = "Relative error is undefined for a zero signal"):
        super().__init__(
            message=message,
            error_code=ErrorCode.UNDEFINED_RATIO,
            exit_code=EXIT_USAGE_ERROR,
        )


class EnumerationTooLargeException(ApplicationException):
    """Brute-force enumeration beyond the configured limit"""

    def __init__(self, message: str, count: int, limit: int):
        super().__init__(
            message=message,
            error_code=ErrorCode.ENUMERATION_TOO_LARGE,
            context={"count": count, "limit": limit, "alternative": "rho_alternating"},
            exit_code=EXIT_USAGE_ERROR,
        )


class UnsupportedOperationException(ApplicationException):
    """Operation not defined for the given set, cone or operator kind"""

    def __init__(self, message: str, kind: Optional[str] = None):
        context = {}
        if kind:
            context["kind"] = kind

        super().__init__(
            message=message,
            error_code=ErrorCode.UNSUPPORTED_OPERATION,
            context=context,
            exit_code=EXIT_USAGE_ERROR,
        )


class TrainingDivergenceException(ApplicationException):
    """Loss became NaN or infinite during training"""

    def __init__(self, message: str, epoch: int, loss: Optional[float] = None):
        context: Dict[str, Any] = {"epoch": epoch}
        if loss is not None:
            context["loss"] = str(loss)

        super().__init__(
            message=message,
            error_code=ErrorCode.TRAINING_DIVERGENCE,
            context=context,
        )


class TrialProcessingException(ApplicationException):
    """A trial of an experiment failed"""

    def __init__(
        self,
        message: str,
        trial_index: Optional[int] = None,
        completed_count: Optional[int] = None,
        cause: Optional[Exception] = None
    ):
        context = {}
        if trial_index is not None:
            context["trial_index"] = trial_index
        if completed_count is not None:
            context["completed_count"] = completed_count

        super().__init__(
            message=message,
            error_code=ErrorCode.TRIAL_PROCESSING_ERROR,
            context=context,
            cause=cause,
        )


class InfrastructureException(ApplicationException):
    """Exceptions from the infrastructure layer"""
    pass


class FileSystemException(InfrastructureException):
    """File system errors"""

    def __init__(self, message: str, file_path: Optional[str] = None, cause: Optional[Exception] = None):
        context = {}
        if file_path:
            context["file_path"] = file_path

        super().__init__(
            message=message,
            error_code=ErrorCode.FILE_SYSTEM_ERROR,
            context=context,
            cause=cause,
        )


class ConfigurationException(InfrastructureException):
    """Unreadable or invalid experiment configuration documents"""

    def __init__(self, message: str, path: Optional[str] = None, cause: Optional[Exception] = None):
        context = {}
        if path:
            context["path"] = path

        super().__init__(
            message=message,
            error_code=ErrorCode.CONFIGURATION_ERROR,
            context=context,
            cause=cause,
            exit_code=EXIT_USAGE_ERROR,
        )

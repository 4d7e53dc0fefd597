"""
Error Handling for the vtlab pipeline

Provides:
1. Consistent error categories and severities
2. A single exception hierarchy carrying machine-readable details
3. One-line JSON error rendering for the command line
4. A divergence guard that watches training losses
"""
import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from .core.logging_config import LogCategory, get_logger

logger = get_logger(__name__, LogCategory.TRAINING)


class ErrorCategory(Enum):
    """Error categories for consistent classification"""
    REJECTED_INPUT = "rejected_input"
    NUMERIC_FAULT = "numeric_fault"
    DIVERGENCE = "divergence"
    MISSING_INPUT = "missing_input"
    CONFIG_VALIDATION = "config_validation"
    CONFIG_MISMATCH = "config_mismatch"
    INSUFFICIENT_DATA = "insufficient_data"
    UNKNOWN = "unknown_error"


class ErrorSeverity(Enum):
    """Error severity levels"""
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class VtlabError(Exception):
    """Base class for every error raised by the package."""

    category: ErrorCategory = ErrorCategory.UNKNOWN
    severity: ErrorSeverity = ErrorSeverity.MEDIUM

    def __init__(
        self,
        message: str,
        details: Optional[Dict[str, Any]] = None,
        suggestions: Optional[List[str]] = None,
    ):
        super().__init__(message)
        self.message = message
        self.details = details or {}
        self.suggestions = suggestions or []


class RejectedInputError(VtlabError, ValueError):
    """Input violates a documented precondition (shape, range, emptiness)."""
    category = ErrorCategory.REJECTED_INPUT
    severity = ErrorSeverity.LOW


class NumericFaultError(VtlabError, ArithmeticError):
    """A non-finite value appeared inside a computation."""
    category = ErrorCategory.NUMERIC_FAULT
    severity = ErrorSeverity.HIGH

    def __init__(self, message: str, layer: Optional[int] = None, **kwargs):
        details = kwargs.pop("details", None) or {}
        if layer is not None:
            details["layer"] = layer
        super().__init__(message, details=details, **kwargs)
        self.layer = layer


class DivergenceError(NumericFaultError):
    """A training loop produced non-finite losses."""
    category = ErrorCategory.DIVERGENCE
    severity = ErrorSeverity.CRITICAL


class MissingInputError(VtlabError, FileNotFoundError):
    """An upstream artifact is absent from the run directory."""
    category = ErrorCategory.MISSING_INPUT
    severity = ErrorSeverity.MEDIUM

    def __init__(self, artifact: str, producer: str):
        super().__init__(
            f"missing input {artifact}; run '{producer}' first",
            details={"artifact": artifact, "producer": producer},
            suggestions=[f"vtlab {producer} --run-id <run-id>"],
        )
        self.artifact = artifact
        self.producer = producer


class ConfigValidationError(VtlabError, ValueError):
    """One or more configuration keys are unknown or hold invalid values."""
    category = ErrorCategory.CONFIG_VALIDATION
    severity = ErrorSeverity.LOW

    def __init__(self, bad_keys: Dict[str, str]):
        listing = "; ".join(f"{key}: {reason}" for key, reason in sorted(bad_keys.items()))
        super().__init__(f"invalid configuration: {listing}", details={"bad_keys": bad_keys})
        self.bad_keys = bad_keys


class ConfigMismatchError(VtlabError, ValueError):
    """Artifacts produced under different configurations were combined."""
    category = ErrorCategory.CONFIG_MISMATCH
    severity = ErrorSeverity.MEDIUM


class InsufficientDataError(RejectedInputError):
    """The data holds no records of the kind an operation needs."""
    category = ErrorCategory.INSUFFICIENT_DATA


@dataclass
class StandardErrorResponse:
    """Standardized error payload, rendered as one JSON line"""
    success: bool = False
    error: str = ""
    message: str = ""
    category: str = ErrorCategory.UNKNOWN.value
    severity: str = ErrorSeverity.MEDIUM.value
    details: Dict[str, Any] = field(default_factory=dict)
    suggestions: List[str] = field(default_factory=list)

    @classmethod
    def from_exception(cls, exc: BaseException) -> "StandardErrorResponse":
        if isinstance(exc, VtlabError):
            return cls(
                error=type(exc).__name__,
                message=exc.message,
                category=exc.category.value,
                severity=exc.severity.value,
                details=exc.details,
                suggestions=exc.suggestions,
            )
        return cls(
            error=type(exc).__name__,
            message=str(exc),
            severity=ErrorSeverity.HIGH.value,
        )

    def to_json_line(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, default=str)


class DivergenceGuard:
    """Watches the scalar diagnostics of a training loop and aborts on the first non-finite one."""

    def __init__(self, name: str):
        self.name = name
        self.checks = 0
        self.last_finite: Dict[str, float] = {}

    def check(self, iteration: int, **values: float) -> None:
        self.checks += 1
        bad = {key: value for key, value in values.items() if not math.isfinite(float(value))}
        if bad:
            logger.error(
                f"{self.name} diverged at iteration {iteration}: {bad} "
                f"(last finite values {self.last_finite})",
                operation=self.name, iteration=iteration,
            )
            raise DivergenceError(
                f"{self.name} diverged at iteration {iteration}",
                details={
                    "iteration": iteration,
                    "non_finite": {key: str(value) for key, value in bad.items()},
                    "last_finite": dict(self.last_finite),
                },
                suggestions=["lower the learning rate", "check the input data for extreme values"],
            )
        self.last_finite.update({key: float(value) for key, value in values.items()})

    def get_stats(self) -> Dict[str, Any]:
        return {"name": self.name, "checks": self.checks, "last_finite": dict(self.last_finite)}

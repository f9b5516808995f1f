"""계산 오류 계층(Error hierarchy shared by the CLI and the query API)."""
from __future__ import annotations

from typing import Any, Dict, Optional


class AppException(Exception):
    """실험실 기본 예외(Base lab error carrying both an HTTP status and an exit code)."""

    def __init__(
        self,
        status_code: int,
        exit_code: int,
        error_code: str,
        message: str,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        """Store the codes and payload reported to callers.

        Args:
            status_code: HTTP status code used by the query API
            exit_code: CLI process exit code (1 check failure, 2 input, 3 numerical)
            error_code: Machine-readable error code (e.g., "DOMAIN_ERROR")
            message: One-line description shown on stderr or in the API body
            details: Offending values and diagnostics
        """
        self.status_code = status_code
        self.exit_code = exit_code
        self.error_code = error_code
        self.message = message
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        """Error payload as printed by the CLI and returned by the API."""
        response: Dict[str, Any] = {
            "error": {
                "code": self.error_code,
                "message": self.message,
            }
        }
        if self.details:
            response["error"]["details"] = self.details
        return response


class InvalidInputError(AppException):
    """유효하지 않은 입력(Invalid input - 400)."""

    def __init__(
        self,
        field: str,
        reason: str,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        """Record which argument was rejected.

        Args:
            field: Argument or request field name (e.g., "N", "checks")
            reason: Why it was rejected
            details: Validator output, when available
        """
        message = f"Invalid value for '{field}': {reason}"
        super().__init__(
            status_code=400,
            exit_code=2,
            error_code="INVALID_INPUT",
            message=message,
            details=details or {"field": field, "reason": reason},
        )


class ConfigError(AppException):
    """설정 오류(Configuration error - 400)."""

    def __init__(
        self,
        source: str,
        reason: str,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        message = f"Configuration '{source}' is invalid: {reason}"
        super().__init__(
            status_code=400,
            exit_code=2,
            error_code="CONFIG_ERROR",
            message=message,
            details=details or {"source": source, "reason": reason},
        )


class DomainError(AppException):
    """정의역 위반(Argument outside the analyticity domain - 422)."""

    def __init__(
        self,
        quantity: str,
        reason: str,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        """Initialize with domain context.

        Args:
            quantity: Name of the offending argument (e.g., "zeta", "z")
            reason: Which domain condition failed
            details: Offending values, distances to the cut, margins
        """
        message = f"'{quantity}' is outside its domain: {reason}"
        super().__init__(
            status_code=422,
            exit_code=2,
            error_code="DOMAIN_ERROR",
            message=message,
            details=details or {"quantity": quantity, "reason": reason},
        )


class ContourInfeasibleError(AppException):
    """윤곽 구성 불가(No admissible contour - 422)."""

    def __init__(self, reason: str, diagnostics: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(
            status_code=422,
            exit_code=3,
            error_code="CONTOUR_INFEASIBLE",
            message=f"No admissible contour: {reason}",
            details=diagnostics or {"reason": reason},
        )


class NumericalError(AppException):
    """수치 계산 실패(Numerical failure - 500)."""

    def __init__(
        self,
        operation: str,
        reason: str,
        diagnostics: Optional[Dict[str, Any]] = None,
    ) -> None:
        """Initialize with numerical diagnostics.

        Args:
            operation: Operation that failed (e.g., "f_integral", "eigen_spectrum")
            reason: Failure description
            diagnostics: Estimates, step sizes, iteration counts
        """
        message = f"{operation} failed: {reason}"
        super().__init__(
            status_code=500,
            exit_code=3,
            error_code="NUMERICAL_ERROR",
            message=message,
            details=diagnostics or {"operation": operation, "reason": reason},
        )


class UnsupportedMethodError(AppException):
    """지원하지 않는 방법(Unsupported method - 400)."""

    def __init__(self, method: str, reason: str) -> None:
        super().__init__(
            status_code=400,
            exit_code=2,
            error_code="UNSUPPORTED_METHOD",
            message=f"Method '{method}' is not supported here: {reason}",
            details={"method": method, "reason": reason},
        )


class CheckFailure(AppException):
    """검증 실패(Verification check failed)."""

    def __init__(self, check: str, metrics: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(
            status_code=200,
            exit_code=1,
            error_code="CHECK_FAILED",
            message=f"Check '{check}' did not pass.",
            details={"check": check, "metrics": metrics or {}},
        )

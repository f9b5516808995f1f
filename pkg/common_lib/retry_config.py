"""재시도 로직 설정 및 유틸리티(Retry logic configuration and utilities)."""
from __future__ import annotations

from typing import Any, Sequence

import numpy as np
from scipy.linalg import LinAlgError
from tenacity import (
    Retrying,
    retry_if_exception,
    stop_after_attempt,
    wait_none,
)

from .errors import NumericalError


class NonFiniteResult(ArithmeticError):
    """LAPACK returned NaN/inf without raising."""


def _is_retryable_exception(exc: BaseException) -> bool:
    """재시도 가능한 예외인지 확인(Check if exception is retryable).

    Retryable exceptions:
    - scipy.linalg.LinAlgError: LAPACK non-convergence for this driver
    - NonFiniteResult: driver produced NaN/inf eigenpairs

    Non-retryable exceptions:
    - ValueError / TypeError: malformed input, retrying cannot help
    """
    return isinstance(exc, (LinAlgError, NonFiniteResult))


def _is_task_retryable(exc: BaseException) -> bool:
    """Study tasks also retry once after the eigensolver exhausted its drivers."""
    return _is_retryable_exception(exc) or isinstance(exc, NumericalError)


def ensure_finite(*arrays: np.ndarray) -> None:
    """Raise NonFiniteResult if any array holds NaN or inf."""
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise NonFiniteResult("non-finite values in solver output")


def get_eigensolver_retrying(drivers: Sequence[str]) -> Retrying:
    """
    고유값 솔버용 재시도 전략(Retrying iterator for the dense eigensolver).

    One attempt per LAPACK driver, no waiting; the caller picks the driver
    from ``attempt.retry_state.attempt_number``.

    Args:
        drivers: Driver names in fallback order

    Returns:
        Configured tenacity Retrying instance
    """
    return Retrying(
        stop=stop_after_attempt(max(1, len(drivers))),
        wait=wait_none(),
        retry=retry_if_exception(_is_retryable_exception),
        reraise=True,
    )


def get_retry_strategy(attempts: int = 2) -> dict[str, Any]:
    """
    작업 단위 재시도 전략(Retry strategy for one study task).

    Returns:
        Dictionary of arguments for Retrying
    """
    return {
        "stop": stop_after_attempt(attempts),
        "wait": wait_none(),
        "retry": retry_if_exception(_is_task_retryable),
        "reraise": True,
    }

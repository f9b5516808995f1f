"""관찰성 및 구조화 로깅(Observability and structured logging)."""
from __future__ import annotations

import logging
from contextvars import ContextVar
from datetime import datetime, timezone
from typing import Any, Dict

from pythonjsonlogger import jsonlogger

# Run identifier for one CLI invocation or HTTP request
run_id_ctx: ContextVar[str] = ContextVar("run_id", default="system")
# Task label inside a fan-out (e.g. "converge:L=8:z=0.5")
task_ctx: ContextVar[str] = ContextVar("task", default="-")


def get_run_id() -> str:
    """실행 ID 조회(Retrieve the current run ID).

    Returns:
        Current run ID from context, or "system" if not set.
    """
    return run_id_ctx.get()


def get_task() -> str:
    """작업 라벨 조회(Retrieve the current task label)."""
    return task_ctx.get()


class CustomJsonFormatter(jsonlogger.JsonFormatter):
    """사용자 정의 JSON 포매터(Custom JSON formatter with run/task injection).

    Extends pythonjsonlogger.JsonFormatter to inject run_id and task
    and manually handle all field creation to avoid KeyErrors.
    """

    def add_fields(
        self,
        log_record: Dict[str, Any],
        record: logging.LogRecord,
        message_dict: Dict[str, Any],
    ) -> None:
        """
        필드 추가 및 실행 ID 삽입(Add fields and inject run ID).

        Args:
            log_record: The log record dictionary
            record: The LogRecord object
            message_dict: The message dictionary
        """
        super().add_fields(log_record, record, message_dict)

        if "timestamp" not in log_record:
            log_record["timestamp"] = datetime.now(timezone.utc).isoformat()

        log_record.pop("asctime", None)

        log_record["run_id"] = get_run_id()
        log_record["task"] = get_task()

        if "level" not in log_record:
            log_record["level"] = record.levelname

        if "message" not in log_record:
            log_record["message"] = record.getMessage()

        if "name" not in log_record:
            log_record["name"] = record.name

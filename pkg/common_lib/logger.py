import logging
import sys
from typing import Optional, TextIO

from .observability import CustomJsonFormatter

_logging_configured = False

TEXT_FORMAT = "[%(asctime)s] %(levelname)s in %(module)s: %(message)s"


def setup_logging(level: str = "INFO", fmt: str = "text", force: bool = False, stream: Optional[TextIO] = None) -> None:
    """루트 로거 설정(Configure the root logger once).

    Args:
        level: Log level name
        fmt: "text" for the plain format, "json" for structured records
        force: Reconfigure even if logging was already set up (CLI flags)
        stream: Target stream, stdout by default; the CLI keeps stdout for results
    """
    global _logging_configured
    if _logging_configured and not force:
        return

    handler = logging.StreamHandler(stream or sys.stdout)
    if fmt == "json":
        handler.setFormatter(CustomJsonFormatter("%(message)s"))
    else:
        handler.setFormatter(logging.Formatter(TEXT_FORMAT))

    logging.basicConfig(level=level.upper(), handlers=[handler], force=True)

    # 라이브러리 로그 레벨 조정
    logging.getLogger("uvicorn.access").setLevel(logging.WARNING)
    logging.getLogger("asyncio").setLevel(logging.WARNING)

    _logging_configured = True


def get_logger(name: str) -> logging.Logger:
    """명명된 로거 가져오기(Get a named logger).

    Args:
        name: Logger name (typically __name__)

    Returns:
        Configured logger instance
    """
    setup_logging()
    return logging.getLogger(name)

"""전개 보고서 JSON 저장소(Expansion report JSON repository)."""
from __future__ import annotations

from pathlib import Path

from pydantic import ValidationError

from common_lib.errors import ConfigError
from common_lib.logger import get_logger

from .models import ExpansionReport

logger = get_logger(__name__)


class ReportRepository:
    """보고서 입출력(One ExpansionReport per JSON file)."""

    def __init__(self, root: str | Path) -> None:
        self._root = Path(root)

    def path_for(self, name: str) -> Path:
        return self._root / f"{name}.json"

    def save(self, report: ExpansionReport, name: str) -> Path:
        self._root.mkdir(parents=True, exist_ok=True)
        path = self.path_for(name)
        path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
        logger.info("전개 보고서 저장(Expansion report saved): %s (%s, N=%d)", path, report.kind, report.order)
        return path

    def load(self, name: str) -> ExpansionReport:
        path = self.path_for(name)
        if not path.exists():
            raise ConfigError(str(path), "report file not found")
        try:
            return ExpansionReport.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as exc:
            raise ConfigError(str(path), f"malformed report: {exc.errors()[0]['msg']}") from exc

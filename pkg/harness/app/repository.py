"""연구 결과 저장소(Study result and verify report repository, JSON or CSV)."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import ValidationError

from common_lib.errors import ConfigError
from common_lib.logger import get_logger

from .models import CheckResult, PointValue, StudyResult, VerifyReport

logger = get_logger(__name__)

Format = Literal["csv", "json"]

POINT_COLUMNS = ("source", "L", "spacing", "omega", "re_z", "im_z", "N", "value", "method", "error_estimate", "xi")
CHECK_COLUMNS = ("name", "passed", "seconds", "message", "metrics")


def _optional(text: str) -> Optional[str]:
    return text if text != "" else None


class ResultRepository:
    """결과 입출력(StudyResult and VerifyReport files under one directory).

    CSV results keep one row per value in ``<name>.csv`` and the remaining
    fields in ``<name>.meta.json``.
    """

    def __init__(self, root: str | Path) -> None:
        self._root = Path(root)

    def path_for(self, name: str, fmt: Format) -> Path:
        return self._root / f"{name}.{fmt}"

    def _write_json(self, path: Path, text: str) -> Path:
        self._root.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        return path

    def save_result(self, result: StudyResult, name: str, fmt: Format = "json") -> Path:
        if fmt == "json":
            path = self._write_json(self.path_for(name, "json"), result.model_dump_json(indent=2))
        else:
            self._root.mkdir(parents=True, exist_ok=True)
            path = self.path_for(name, "csv")
            with path.open("w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle)
                writer.writerow(POINT_COLUMNS)
                for point in [*result.points, *result.bulk]:
                    writer.writerow(
                        [
                            point.source,
                            "" if point.L is None else repr(point.L),
                            "" if point.spacing is None else repr(point.spacing),
                            repr(point.omega),
                            repr(point.z.real),
                            repr(point.z.imag),
                            point.N,
                            repr(point.value),
                            point.method,
                            repr(point.error_estimate),
                            "" if point.xi is None else repr(point.xi),
                        ]
                    )
            meta = result.model_dump(mode="json", exclude={"points", "bulk"})
            self._write_json(self._root / f"{name}.meta.json", json.dumps(meta, indent=2))
        logger.info("연구 결과 저장(Study result saved): %s (%d values)", path, len(result.points) + len(result.bulk))
        return path

    def _read_points(self, path: Path) -> list[PointValue]:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            if tuple(reader.fieldnames or ()) != POINT_COLUMNS:
                raise ConfigError(str(path), f"expected columns {POINT_COLUMNS}")
            rows = list(reader)
        points = []
        for row in rows:
            L, spacing, xi = _optional(row["L"]), _optional(row["spacing"]), _optional(row["xi"])
            points.append(
                PointValue(
                    source=row["source"],
                    L=None if L is None else float(L),
                    spacing=None if spacing is None else float(spacing),
                    omega=float(row["omega"]),
                    z=complex(float(row["re_z"]), float(row["im_z"])),
                    N=int(row["N"]),
                    value=complex(row["value"]),
                    method=row["method"],
                    error_estimate=float(row["error_estimate"]),
                    xi=None if xi is None else complex(xi),
                )
            )
        return points

    def load_result(self, name: str, fmt: Format = "json") -> StudyResult:
        path = self.path_for(name, fmt)
        if not path.exists():
            raise ConfigError(str(path), "result file not found")
        try:
            if fmt == "json":
                return StudyResult.model_validate_json(path.read_text(encoding="utf-8"))
            meta_path = self._root / f"{name}.meta.json"
            if not meta_path.exists():
                raise ConfigError(str(meta_path), "metadata file not found")
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            points = self._read_points(path)
            meta["points"] = [p for p in points if p.source != "bulk"]
            meta["bulk"] = [p for p in points if p.source == "bulk"]
            return StudyResult.model_validate(meta)
        except (ValueError, ValidationError) as exc:
            raise ConfigError(str(path), f"malformed result: {exc}") from exc

    def save_verify(self, report: VerifyReport, name: str = "verify", fmt: Format = "json") -> Path:
        if fmt == "json":
            path = self._write_json(self.path_for(name, "json"), report.model_dump_json(indent=2))
        else:
            self._root.mkdir(parents=True, exist_ok=True)
            path = self.path_for(name, "csv")
            with path.open("w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle)
                writer.writerow(CHECK_COLUMNS)
                for check in report.checks:
                    writer.writerow(
                        [check.name, int(check.passed), repr(check.seconds), check.message, json.dumps(check.metrics)]
                    )
            meta = {"selection": report.selection, "seed": report.seed}
            self._write_json(self._root / f"{name}.meta.json", json.dumps(meta))
        logger.info("검증 보고서 저장(Verify report saved): %s", path)
        return path

    def load_verify(self, name: str = "verify", fmt: Format = "json") -> VerifyReport:
        path = self.path_for(name, fmt)
        if not path.exists():
            raise ConfigError(str(path), "verify report not found")
        try:
            if fmt == "json":
                return VerifyReport.model_validate_json(path.read_text(encoding="utf-8"))
            meta = json.loads((self._root / f"{name}.meta.json").read_text(encoding="utf-8"))
            with path.open(newline="", encoding="utf-8") as handle:
                rows = list(csv.DictReader(handle))
            checks = [
                CheckResult(
                    name=row["name"],
                    passed=bool(int(row["passed"])),
                    seconds=float(row["seconds"]),
                    message=row["message"],
                    metrics=json.loads(row["metrics"]),
                )
                for row in rows
            ]
            return VerifyReport(selection=meta["selection"], seed=meta["seed"], checks=checks)
        except (OSError, ValueError, KeyError, ValidationError) as exc:
            raise ConfigError(str(path), f"malformed report: {exc}") from exc

"""감수율 CSV 저장소(Susceptibility CSV repository)."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

from pydantic import ValidationError

from common_lib.errors import ConfigError
from common_lib.logger import get_logger

from .models import SusceptibilityRecord

logger = get_logger(__name__)

COLUMNS = ("L", "beta", "omega", "re_z", "im_z", "N", "chi", "method", "error_estimate")


class SusceptibilityRepository:
    """감수율 표 입출력(CSV rows L, beta, omega, Re z, Im z, N, chi, method, error_estimate).

    ``chi`` is written as a Python complex literal, e.g. ``(0.25-1e-17j)``.
    """

    def __init__(self, root: str | Path) -> None:
        self._root = Path(root)

    def path_for(self, name: str) -> Path:
        return self._root / f"{name}.csv"

    def save(self, records: Iterable[SusceptibilityRecord], name: str) -> Path:
        self._root.mkdir(parents=True, exist_ok=True)
        path = self.path_for(name)
        count = 0
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(COLUMNS)
            for record in records:
                writer.writerow(
                    [
                        repr(record.L),
                        repr(record.beta),
                        repr(record.omega),
                        repr(record.z.real),
                        repr(record.z.imag),
                        record.N,
                        repr(record.chi),
                        record.method,
                        repr(record.error_estimate),
                    ]
                )
                count += 1
        logger.info("감수율 저장(Susceptibilities saved): %s (%d rows)", path, count)
        return path

    def load(self, name: str) -> list[SusceptibilityRecord]:
        path = self.path_for(name)
        if not path.exists():
            raise ConfigError(str(path), "susceptibility file not found")
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            if tuple(reader.fieldnames or ()) != COLUMNS:
                raise ConfigError(str(path), f"expected columns {COLUMNS}")
            rows = list(reader)
        try:
            return [
                SusceptibilityRecord(
                    L=float(row["L"]),
                    beta=float(row["beta"]),
                    omega=float(row["omega"]),
                    re_z=row["re_z"],
                    im_z=row["im_z"],
                    N=int(row["N"]),
                    chi=complex(row["chi"]),
                    method=row["method"],
                    error_estimate=float(row["error_estimate"]),
                )
                for row in rows
            ]
        except (ValueError, ValidationError) as exc:
            raise ConfigError(str(path), f"malformed row: {exc}") from exc

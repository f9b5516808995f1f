"""스펙트럼 CSV 저장소(Spectrum CSV repository)."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from common_lib.errors import ConfigError
from common_lib.logger import get_logger

from .models import BoxGrid, Spectrum

logger = get_logger(__name__)

COLUMNS = ("index", "eigenvalue")


class SpectrumRepository:
    """CSV 입출력(CSV export/import with columns index, eigenvalue)."""

    def __init__(self, root: str | Path) -> None:
        self._root = Path(root)

    def path_for(self, name: str) -> Path:
        return self._root / f"{name}.csv"

    def save(self, spectrum: Spectrum, name: str) -> Path:
        """스펙트럼 저장(Write one spectrum; floats use repr for exact round trips)."""

        self._root.mkdir(parents=True, exist_ok=True)
        path = self.path_for(name)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(COLUMNS)
            for index, value in enumerate(spectrum.eigenvalues):
                writer.writerow([index, repr(float(value))])
        logger.info("스펙트럼 저장(Spectrum saved): %s (%d levels)", path, len(spectrum))
        return path

    def load(self, name: str, grid: BoxGrid, omega: float) -> Spectrum:
        path = self.path_for(name)
        if not path.exists():
            raise ConfigError(str(path), "spectrum file not found")
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            if tuple(reader.fieldnames or ()) != COLUMNS:
                raise ConfigError(str(path), f"expected columns {COLUMNS}")
            rows = sorted(reader, key=lambda row: int(row["index"]))
        return Spectrum(np.array([float(row["eigenvalue"]) for row in rows]), grid, omega)

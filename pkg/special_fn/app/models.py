"""특수함수 데이터 모델(Special-function data models)."""
from __future__ import annotations

from enum import IntEnum
from typing import Any, NamedTuple

from pydantic import BaseModel, ConfigDict, Field, field_validator


class Statistics(IntEnum):
    """입자 통계(Particle statistics): +1 Bose, -1 Fermi."""

    BOSE = 1
    FERMI = -1

    @classmethod
    def parse(cls, value: Any) -> "Statistics":
        """문자열/정수 변환(Accept 'bose', 'fermi', '+1', -1, ...)."""

        if isinstance(value, Statistics):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            aliases = {"bose": cls.BOSE, "boson": cls.BOSE, "+1": cls.BOSE, "1": cls.BOSE,
                       "fermi": cls.FERMI, "fermion": cls.FERMI, "-1": cls.FERMI}
            if key in aliases:
                return aliases[key]
            raise ValueError(f"unknown statistics '{value}'")
        return cls(int(value))

    @property
    def epsilon(self) -> int:
        return int(self.value)

    @property
    def branch_point(self) -> float:
        """분지점 ζ = ε (Branch point of ln(1 - εζ))."""
        return float(self.value)

    def cut_distance(self, zeta: complex, start: float = 1.0) -> float:
        """분지 절단까지 거리(Distance from zeta to the cut).

        Bose: cut [start, inf) on the real axis. Fermi: (-inf, -start].
        """

        w = complex(zeta) * self.epsilon
        if w.real >= start:
            return abs(w.imag)
        return abs(w - start)

    def in_domain(self, zeta: complex, margin: float, start: float = 1.0) -> bool:
        return self.cut_distance(zeta, start) >= margin

    @property
    def label(self) -> str:
        return "bose" if self is Statistics.BOSE else "fermi"


class PolyArg(BaseModel):
    """특수함수 인자(Arguments of f_sigma^eps)."""

    model_config = ConfigDict(frozen=True)

    sigma: float = Field(..., gt=0.0, description="차수 σ(Order, > 0)")
    zeta: complex = Field(..., description="복소 인자 ζ(Complex argument)")
    eps: Statistics = Field(default=Statistics.BOSE, description="통계(Statistics)")

    @field_validator("eps", mode="before")
    @classmethod
    def parse_eps(cls, v: Any) -> Statistics:
        return Statistics.parse(v)


class PolyValue(NamedTuple):
    """급수 결과와 절단 지수(Series value with truncation index)."""

    value: complex
    terms: int

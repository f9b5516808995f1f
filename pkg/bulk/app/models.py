"""열역학 매개변수 모델(Thermodynamic parameter models)."""
from __future__ import annotations

import math
from typing import Any, NamedTuple, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from special_fn.app.models import Statistics


class ThermoParams(BaseModel):
    """β, ω, ε, z 묶음(Inverse temperature, field, statistics, fugacity)."""

    model_config = ConfigDict(frozen=True)

    beta: float = Field(..., gt=0.0, description="역온도(Inverse temperature)")
    omega: float = Field(default=1.0, ge=0.0, description="사이클로트론 진동수(Cyclotron frequency)")
    eps: Statistics = Field(default=Statistics.BOSE, description="통계(Statistics)")
    z: complex = Field(default=0j, description="복소 퓨가시티(Complex fugacity)")

    @field_validator("eps", mode="before")
    @classmethod
    def parse_eps(cls, v: Any) -> Statistics:
        return Statistics.parse(v)

    @property
    def cut_start(self) -> float:
        """|z| where the cut of D_eps begins: e^(beta omega / 2)."""
        return math.exp(0.5 * self.beta * self.omega)

    def cut_distance(self) -> float:
        return self.eps.cut_distance(self.z, self.cut_start)

    def with_omega(self, omega: float) -> "ThermoParams":
        return self.model_copy(update={"omega": float(omega)})

    def with_z(self, z: complex) -> "ThermoParams":
        return self.model_copy(update={"z": complex(z)})


class LevelSum(NamedTuple):
    """란다우 준위 합 결과(Landau level sum with its truncation data)."""

    value: complex
    levels: int
    tail_bound: float


class SusceptibilityResult(BaseModel):
    """일반화 감수율 결과(Generalized susceptibility value)."""

    value: complex
    order: int = Field(..., ge=0)
    method: str
    error_estimate: float = Field(default=0.0, description="오차 추정(Error estimate)")
    step: Optional[float] = Field(default=None, description="유한차분 간격(Finite-difference step)")
    levels: Optional[int] = Field(default=None, description="합한 준위 수(Levels summed)")

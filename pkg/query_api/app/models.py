"""QueryAPI 요청/응답 모델(QueryAPI request and response models)."""
from __future__ import annotations

from typing import Any, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from finite_gas.app.models import SusceptibilityRecord
from harness.app.models import parse_complex
from special_fn.app.models import Statistics


class PointRequest(BaseModel):
    """열역학 점 요청(Thermodynamic point request).

    Fugacities accept numbers, ``"0.5j"`` style strings or ``[re, im]`` pairs.
    ``L``, ``n`` and ``n3max`` are used only with ``source="finite"``.
    """

    model_config = ConfigDict(extra="forbid")

    source: Literal["bulk", "finite"] = "bulk"
    beta: float = Field(default=1.0, gt=0.0)
    omega: float = Field(default=1.0, gt=0.0)
    eps: Statistics = Statistics.BOSE
    z: List[complex] = Field(default_factory=lambda: [0.5 + 0j], min_length=1)
    L: float = Field(default=8.0, gt=0.0)
    n: int = Field(default=12, ge=2, le=48, description="축당 격자점(Interior points per side)")
    n3max: Optional[int] = Field(default=None, ge=1)

    @field_validator("eps", mode="before")
    @classmethod
    def parse_eps(cls, v: Any) -> Statistics:
        return Statistics.parse(v)

    @field_validator("z", mode="before")
    @classmethod
    def parse_fugacities(cls, v: Any) -> list[complex]:
        if isinstance(v, (str, int, float, complex)):
            v = [v]
        try:
            return [parse_complex(item) for item in v]
        except (TypeError, ValueError) as exc:
            raise ValueError(f"invalid fugacity: {exc}") from exc


class PressureRequest(PointRequest):
    method: Literal["eigsum", "contour"] = "eigsum"


class PressureRow(BaseModel):
    z: complex
    P: complex
    method: str
    error_estimate: float = 0.0


class PressureResponse(BaseModel):
    """압력 응답(Pressure table)."""

    source: str
    L: Optional[float] = None
    rows: List[PressureRow]


class ChiRequest(PointRequest):
    orders: List[int] = Field(default_factory=lambda: [1], min_length=1)
    method: Optional[str] = Field(
        default=None, description="eig_fd|contour_fd|hellmann (finite) 또는 analytic|finite_diff (bulk)"
    )


class ChiResponse(BaseModel):
    source: str
    records: List[SusceptibilityRecord]


class VerifyRequest(BaseModel):
    checks: List[str] = Field(default_factory=list, description="검사 이름 또는 all(Check names or 'all')")
    seed: Optional[int] = Field(default=None, ge=0)

"""연구 설정과 결과 모델(Study configuration and result models)."""
from __future__ import annotations

import hashlib
import json
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from finite_gas.app.models import FugacityCompact
from special_fn.app.models import Statistics


def parse_complex(value: Any) -> complex:
    """TOML has no complex type: accept numbers, "0.5j" style strings and [re, im] pairs."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError("complex pair must be [re, im]")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    return complex(value)


class StudyConfig(BaseModel):
    """연구 설정(Study configuration loaded from TOML or JSON).

    Box sizes share one grid spacing ``spacing``; the number of interior
    points grows with L.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    lengths: tuple[float, ...] = Field(default=(6.0, 8.0, 10.0, 12.0), min_length=1, description="상자 크기 사다리(Box sizes L)")
    spacing: float = Field(default=0.4, gt=0.0, description="공통 격자 간격 h(Shared grid spacing)")
    refine_spacing: Optional[float] = Field(
        default=None, gt=0.0, description="이산화 오차용 세밀 간격(Finer spacing for the discretization error)"
    )
    n3max: Optional[int] = Field(default=None, ge=1, description="종방향 준위 수(Longitudinal levels, default n)")
    beta: float = Field(default=1.0, gt=0.0, description="역온도(Inverse temperature)")
    omegas: tuple[float, ...] = Field(default=(1.0,), min_length=1, description="자기장 값(Field values)")
    eps: Statistics = Field(default=Statistics.BOSE, description="통계(Statistics)")
    fugacities: tuple[complex, ...] = Field(
        default=(0.3, 0.5, 0.5j, -0.4), min_length=1, description="컴팩트 K 표본(Fugacity compact samples)"
    )
    margin: float = Field(default=1e-3, gt=0.0, description="절단까지 최소 거리(Distance from the cut)")
    orders: tuple[int, ...] = Field(default=(0, 1), min_length=1, description="감수율 차수 N(Orders N)")
    finite_method: Literal["eig_fd", "contour_fd", "hellmann"] = Field(
        default="eig_fd", description="유한 부피 방법(Finite-volume method)"
    )
    bulk_method: Literal["analytic", "finite_diff"] = Field(default="analytic", description="벌크 방법(Bulk method)")
    xi_samples: tuple[complex, ...] = Field(
        default=(0.65, 0.65j, -0.65), min_length=1, description="g 트레이스용 xi 표본(xi samples for Tr g)"
    )
    ratio_tolerance: float = Field(default=1.5, gt=1.0, description="유계성 비율 상한(Max/min ratio bound)")
    spread_tolerance: float = Field(default=0.3, gt=0.0, description="Tr g/L^dim 편차 상한(Relative spread bound)")
    threads: Optional[int] = Field(default=None, ge=1, description="작업 스레드 수(Worker threads)")
    seed: Optional[int] = Field(default=None, ge=0, description="난수 시드(Random seed)")
    out_dir: Optional[str] = Field(default=None, description="출력 디렉터리(Output directory)")
    format: Literal["csv", "json"] = Field(default="json", description="출력 형식(Output format)")

    @field_validator("eps", mode="before")
    @classmethod
    def parse_eps(cls, v: Any) -> Statistics:
        return Statistics.parse(v)

    @field_validator("fugacities", "xi_samples", mode="before")
    @classmethod
    def parse_complex_list(cls, v: Any) -> tuple[complex, ...]:
        if isinstance(v, (str, int, float, complex)):
            v = [v]
        return tuple(parse_complex(item) for item in v)

    @field_validator("lengths")
    @classmethod
    def check_lengths(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if any(L <= 0 for L in v):
            raise ValueError("box sizes must be positive")
        if len(set(v)) != len(v):
            raise ValueError("box sizes must be distinct")
        return tuple(sorted(v))

    @field_validator("orders")
    @classmethod
    def check_orders(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if any(N < 0 for N in v):
            raise ValueError("orders must be non-negative")
        return tuple(sorted(set(v)))

    @field_validator("omegas")
    @classmethod
    def check_omegas(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if any(omega < 0 for omega in v):
            raise ValueError("field values must be non-negative")
        return v

    @model_validator(mode="after")
    def check_refinement(self) -> "StudyConfig":
        if self.refine_spacing is not None and self.refine_spacing >= self.spacing:
            raise ValueError("refine_spacing must be smaller than spacing")
        for L in self.lengths:
            if L / self.spacing < 5:
                raise ValueError(f"box L={L} holds fewer than 4 interior points at spacing {self.spacing}")
        return self

    def compact(self, omega: float) -> FugacityCompact:
        return FugacityCompact.from_values(self.fugacities, beta=self.beta, omega=omega, eps=self.eps, margin=self.margin)

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form (sorted keys)."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class PointValue(BaseModel):
    """한 점의 감수율 값(One susceptibility value with its method and error estimate)."""

    source: Literal["finite", "bulk", "trace_g"]
    L: Optional[float] = None
    spacing: Optional[float] = None
    omega: float
    z: complex
    N: int = Field(..., ge=0)
    value: complex
    method: str
    error_estimate: float = 0.0
    xi: Optional[complex] = None


class TaskFailure(BaseModel):
    """실패한 작업 표시(Marker for a task that failed inside a sweep)."""

    label: str
    error: dict[str, Any]


class SupStatistic(BaseModel):
    """K 위 상한 통계(sup over K of one quantity for one (L, omega, N))."""

    kind: Literal["finite_size", "discretization", "sup_abs", "trace_g"]
    L: float
    omega: float
    N: int
    value: float
    error_estimate: float = 0.0


class StudyResult(BaseModel):
    """연구 결과(Study output with provenance and pass/fail per criterion)."""

    kind: Literal["converge", "bounds"]
    config_hash: str
    seed: Optional[int] = None
    versions: dict[str, str] = Field(default_factory=dict)
    points: list[PointValue] = Field(default_factory=list)
    bulk: list[PointValue] = Field(default_factory=list)
    sups: list[SupStatistic] = Field(default_factory=list)
    metrics: dict[str, float] = Field(default_factory=dict)
    criteria: dict[str, bool] = Field(default_factory=dict)
    failures: list[TaskFailure] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.criteria.values())


class CheckResult(BaseModel):
    """검증 결과(One verification check)."""

    name: str
    passed: bool
    metrics: dict[str, float] = Field(default_factory=dict)
    message: str = ""
    seconds: float = 0.0


class VerifyReport(BaseModel):
    """검증 보고서(Report of a verify_suite run)."""

    selection: list[str]
    checks: list[CheckResult] = Field(default_factory=list)
    seed: Optional[int] = None

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def summary(self) -> str:
        """사람용 요약(Human summary, one line per check)."""
        if not self.checks:
            return "no checks selected: pass"
        lines = [
            f"{'PASS' if c.passed else 'FAIL'}  {c.name:<26} {c.seconds:7.2f}s  {c.message}" for c in self.checks
        ]
        lines.append(f"{sum(c.passed for c in self.checks)}/{len(self.checks)} passed")
        return "\n".join(lines)

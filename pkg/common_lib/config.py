"""공통 설정 모듈(Common configuration module)."""
from __future__ import annotations

import os
from functools import lru_cache
from typing import Any, Dict

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """시스템 환경설정(System environment settings)."""

    model_config = SettingsConfigDict(
        env_prefix="MG_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        frozen=True,
    )

    app_name: str = Field(default="magnetic-gas-lab", description="애플리케이션 이름(Application name)")
    environment: str = Field(default="development", description="실행 환경(Runtime environment)")

    series_max_terms: int = Field(
        default=10000,
        description="급수 최대 항 수(Maximum number of series terms)",
    )
    series_rel_tol: float = Field(
        default=1e-15,
        description="급수 상대 절단 허용오차(Relative truncation tolerance of series)",
    )
    cut_margin: float = Field(
        default=1e-3,
        description="분지 절단까지 최소 거리(Minimum distance from the branch cut)",
    )
    max_derivative_order: int = Field(
        default=6,
        description="특수함수 도함수 최대 차수(Maximum derivative order of special functions)",
    )
    landau_level_cap: int = Field(
        default=200000,
        description="란다우 준위 합 상한(Cap on summed Landau levels)",
    )
    susceptibility_max_order: int = Field(
        default=4,
        description="감수율 최대 차수(Maximum susceptibility order)",
    )
    quadrature_panel_order: int = Field(
        default=32,
        description="패널당 가우스-르장드르 차수(Gauss-Legendre order per panel)",
    )
    quadrature_rel_tol: float = Field(
        default=1e-13,
        description="적분 수렴 상대 허용오차(Relative convergence tolerance of quadrature)",
    )
    quadrature_max_refinements: int = Field(
        default=4,
        description="적분 패널 최대 세분 횟수(Maximum panel refinements)",
    )
    eigen_residual_tol: float = Field(
        default=1e-9,
        description="고유쌍 잔차 허용오차(Eigenpair residual tolerance, relative to the spectral scale)",
    )
    eigen_drivers: str = Field(
        default="evr,evd,ev",
        description="재시도 순서의 LAPACK 드라이버(LAPACK drivers in retry order, comma separated)",
    )
    contour_nodes: int = Field(default=128, description="윤곽 노드 수(Number of contour nodes)")
    contour_gap: float = Field(
        default=1e-2,
        description="윤곽과 스펙트럼/분지점 사이 간격(Gap between contour, spectrum and branch point)",
    )
    boltzmann_coverage_tol: float = Field(
        default=1e-12,
        description="3차원 조립시 볼츠만 꼬리 허용오차(Boltzmann tail tolerance for 3D assembly)",
    )
    simplex_quad_order: int = Field(
        default=8,
        description="시간 변수당 가우스-르장드르 차수(Gauss-Legendre order per time variable)",
    )
    simplex_node_budget: int = Field(
        default=150000,
        description="단체 적분 노드 예산(Simplex quadrature node budget)",
    )
    fd_richardson_levels: int = Field(
        default=3,
        description="리처드슨 외삽 단계 수(Number of Richardson levels)",
    )

    threads: int = Field(default=4, description="작업 스레드 수(Worker thread count)")
    seed: int = Field(default=20240917, description="난수 시드(Random seed)")
    log_level: str = Field(default="INFO", description="로그 레벨(Log level)")
    log_format: str = Field(default="text", description="로그 형식 text|json(Log format)")

    @property
    def driver_list(self) -> list[str]:
        """LAPACK driver names in fallback order."""
        return [item.strip() for item in self.eigen_drivers.split(",") if item.strip()]

    @field_validator("log_format")
    @classmethod
    def check_log_format(cls, v: str) -> str:
        if v not in {"text", "json"}:
            raise ValueError("log_format must be 'text' or 'json'")
        return v


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """설정 인스턴스 반환(Return a cached settings instance)."""

    return Settings()


def override_settings(overrides: Dict[str, Any]) -> Settings:
    """설정 일부를 덮어쓴 새 인스턴스(New settings instance with overrides applied)."""

    return get_settings().model_copy(update=overrides)


def load_environment() -> None:
    """기본 환경변수를 로드(Load base environment variables)."""

    os.environ.setdefault("TZ", "UTC")
    # BLAS threads compete with the study thread pool.
    os.environ.setdefault("OMP_NUM_THREADS", "1")

"""유한 부피 기체 모델(Finite-volume gas models)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, NamedTuple

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from bulk.app.models import SusceptibilityResult, ThermoParams
from common_lib.errors import DomainError
from special_fn.app.models import Statistics


class FugacityCompact(BaseModel):
    """퓨가시티 컴팩트 K(Compact set K of fugacities, sampled).

    The samples must stay at distance >= margin from the cut of D_eps, which
    starts at |z| = e^(beta omega / 2).
    """

    model_config = ConfigDict(frozen=True)

    samples: tuple[complex, ...] = Field(..., min_length=1, description="표본 z 값(Sampled fugacities)")
    eps: Statistics = Field(default=Statistics.BOSE, description="통계(Statistics)")
    margin: float = Field(default=1e-3, gt=0.0, description="절단까지 최소 거리(Distance from the cut)")
    beta: float = Field(..., gt=0.0, description="역온도(Inverse temperature)")
    omega: float = Field(..., ge=0.0, description="자기장(Field strength)")

    @field_validator("eps", mode="before")
    @classmethod
    def parse_eps(cls, v: Any) -> Statistics:
        return Statistics.parse(v)

    @field_validator("samples", mode="before")
    @classmethod
    def coerce_samples(cls, v: Any) -> tuple[complex, ...]:
        if isinstance(v, (int, float, complex)):
            v = [v]
        return tuple(complex(item) for item in v)

    @property
    def cut_start(self) -> float:
        return math.exp(0.5 * self.beta * self.omega)

    @property
    def sup_abs(self) -> float:
        return max(abs(z) for z in self.samples)

    def as_array(self) -> NDArray[np.complex128]:
        return np.asarray(self.samples, dtype=complex)

    def check_domain(self) -> None:
        """모든 표본이 D_eps 내부인지 확인(Raise DomainError for a sample near the cut)."""

        for z in self.samples:
            distance = self.eps.cut_distance(z, self.cut_start)
            if distance < self.margin:
                raise DomainError(
                    "K",
                    f"sample {z} lies within {distance:.3e} of the cut",
                    {"z": [z.real, z.imag], "distance": distance, "margin": self.margin},
                )

    def params(self, z: complex) -> ThermoParams:
        return ThermoParams(beta=self.beta, omega=self.omega, eps=self.eps, z=z)

    @classmethod
    def disc(
        cls,
        radius: float,
        count: int = 16,
        *,
        beta: float,
        omega: float,
        eps: Statistics | str | int = Statistics.BOSE,
        rings: int = 2,
        margin: float = 1e-3,
    ) -> "FugacityCompact":
        """원판 표본(Closed disc |z| <= radius: origin plus ``rings`` circles of ``count`` points)."""

        samples = [0j]
        angles = 2.0 * np.pi * np.arange(count) / count
        for ring in range(1, rings + 1):
            samples.extend(radius * ring / rings * np.exp(1j * angles))
        return cls(samples=samples, eps=eps, beta=beta, omega=omega, margin=margin)

    @classmethod
    def from_values(
        cls,
        values: Iterable[complex],
        *,
        beta: float,
        omega: float,
        eps: Statistics | str | int = Statistics.BOSE,
        margin: float = 1e-3,
    ) -> "FugacityCompact":
        return cls(samples=tuple(values), eps=eps, beta=beta, omega=omega, margin=margin)


@dataclass(frozen=True)
class Contour:
    """양의 방향 원 윤곽(Positively oriented circle |xi| = radius, trapezoidal in angle).

    weights[j] = i xi_j 2 pi / n, so sum_j weights[j] f(xi_j) approximates the
    contour integral of f.
    """

    nodes: NDArray[np.complex128]
    weights: NDArray[np.complex128]
    radius: float
    eps: Statistics
    orientation: int = 1

    @classmethod
    def circle(cls, radius: float, n_nodes: int, eps: Statistics) -> "Contour":
        theta = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
        nodes = radius * np.exp(1j * theta)
        weights = 1j * nodes * (2.0 * np.pi / n_nodes)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        return cls(nodes=nodes, weights=weights, radius=float(radius), eps=eps)

    def __len__(self) -> int:
        return int(self.nodes.size)

    def winding_number(self, point: complex = 0j) -> float:
        """(1 / 2 pi i) * contour integral of d xi / (xi - point)."""
        return float((np.sum(self.weights / (self.nodes - point)) / (2j * np.pi)).real)

    def encloses(self, point: complex) -> bool:
        return abs(point) < self.radius

    def refined(self, factor: int = 2) -> "Contour":
        return Contour.circle(self.radius, len(self) * factor, self.eps)


class CauchyRiemann(NamedTuple):
    """해석성 점검(Analyticity check of a z-derivative)."""

    derivative: complex
    residual: float


class TraceNormCheck(BaseModel):
    """대각합 노름 상한 점검(Trace-norm bound check of g_L on the contour)."""

    max_trace_norm: float
    bound: float
    resolvent_sup: float
    boltzmann_sum: float
    gibbs_bound: float
    discretization_factor: float
    passed: bool


class SusceptibilityRecord(BaseModel):
    """CSV 한 행(One exported susceptibility row)."""

    L: float
    beta: float
    omega: float
    z: complex
    N: int
    chi: complex
    method: str
    error_estimate: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def split_fugacity(cls, data: Any) -> Any:
        if isinstance(data, dict) and "z" not in data and "re_z" in data:
            data = dict(data)
            data["z"] = complex(float(data.pop("re_z")), float(data.pop("im_z")))
        return data

    @classmethod
    def from_result(cls, L: float, p: ThermoParams, result: SusceptibilityResult) -> "SusceptibilityRecord":
        return cls(
            L=L,
            beta=p.beta,
            omega=p.omega,
            z=p.z,
            N=result.order,
            chi=result.value,
            method=result.method,
            error_estimate=result.error_estimate,
        )


class PressureSummary(NamedTuple):
    """고유값 합 압력과 조건수(Eigenvalue-sum pressure with its conditioning)."""

    value: complex
    conditioning: float
    levels: int

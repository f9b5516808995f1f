"""연산자 커널 모델(Operator-kernel models on the box grid)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import linalg

from spectrum.app.models import BoxGrid

# one decade in delta omega
MIN_SPAN_RATIO = 10.0
MIN_SLOPE_SAMPLES = 4


@dataclass(frozen=True)
class GridKernel:
    """격자 커널(Continuum-kernel samples k(x_i, x_j) on the grid).

    The operator acting on grid functions is h^dim * values; composition,
    trace and norms are taken on that operator.
    """

    values: NDArray[np.complex128]
    grid: BoxGrid
    label: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("kernel values must be a square matrix")
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return int(self.values.shape[0])

    @property
    def operator(self) -> NDArray[np.complex128]:
        return self.values * self.grid.weight

    @classmethod
    def from_operator(cls, matrix: NDArray[np.generic], grid: BoxGrid, label: str = "") -> "GridKernel":
        return cls(np.asarray(matrix, dtype=complex) / grid.weight, grid, label)

    def compose(self, other: "GridKernel", label: str = "") -> "GridKernel":
        """(k1 o k2)(x, x') = h^dim sum_y k1(x, y) k2(y, x')."""
        if other.grid != self.grid:
            raise ValueError("kernels live on different grids")
        return GridKernel(self.grid.weight * (self.values @ other.values), self.grid, label or f"{self.label}*{other.label}")

    def trace(self) -> complex:
        return complex(self.grid.weight * np.trace(self.values))

    def trace_norm(self) -> float:
        return float(np.sum(linalg.svdvals(self.operator)))

    def operator_norm(self) -> float:
        return float(linalg.norm(self.operator, 2))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.values))))
        return bool(np.max(np.abs(self.values - self.values.conj().T)) <= tol * scale)


class FluxChain(BaseModel):
    """플럭스 사슬(Base point x and chain points y_1..y_n in the plane)."""

    model_config = ConfigDict(frozen=True)

    base: tuple[float, ...] = Field(..., description="기준점 x(Base point)")
    chain: tuple[tuple[float, ...], ...] = Field(..., min_length=1, description="사슬 점(Chain points)")

    @field_validator("base")
    @classmethod
    def check_base(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if len(v) < 2:
            raise ValueError("points need at least two coordinates")
        return v

    @field_validator("chain")
    @classmethod
    def check_chain(cls, v: tuple[tuple[float, ...], ...]) -> tuple[tuple[float, ...], ...]:
        if any(len(point) < 2 for point in v):
            raise ValueError("points need at least two coordinates")
        return v

    @property
    def n(self) -> int:
        return len(self.chain)


class DecayFit(BaseModel):
    """비대각 감쇠 적합(Fit of log|k(x0, x')| against |x0 - x'|)."""

    rate: float
    intercept: float
    r_squared: float
    samples: int


class SmallnessBound(BaseModel):
    """섭동 크기 조건(C1 M |delta omega| sup|z| < 1/2)."""

    c1: float
    resolvent_sup: float
    sup_z: float
    delta_omega: float
    value: float
    satisfied: bool


class VolumeScaling(BaseModel):
    """부피 스케일링(Growth of a trace quantity with L at fixed h).

    ``exponent`` is dim plus the log-log slope of the dim-th divided
    differences of the values against the window centres. Surface and corner
    terms (lower powers of L) drop out of those differences, so a value
    growing like L^p gives an exponent near p whatever its boundary layer.
    ``kac_coefficients`` is the least-squares polynomial of degree dim
    (highest power first) and ``fit_residual`` its relative residual.
    """

    quantity: str
    dim: int = Field(..., ge=1)
    lengths: list[float]
    values: list[complex]
    raw_slope: float
    exponent: Optional[float] = Field(None, description="None when the bulk differences vanish")
    kac_coefficients: list[complex]
    fit_residual: float

    @property
    def bulk_coefficient(self) -> complex:
        return self.kac_coefficients[0]

    def obeys_volume_law(self, tolerance: float = 0.15) -> bool:
        return self.exponent is not None and abs(self.exponent - self.dim) <= tolerance


class ExpansionReport(BaseModel):
    """전개 보고서(Coefficients, remainder table and slope fit of one expansion)."""

    kind: str = Field(..., description="semigroup | g_trace")
    order: int = Field(..., ge=1)
    beta: float
    omega0: float
    grid: str
    a_0: Optional[complex] = None
    coefficients: list[complex] = Field(default_factory=list, description="a_1..a_N")
    remainder_samples: list[tuple[float, float]] = Field(default_factory=list)
    slope: Optional[float] = None
    slope_ci: Optional[tuple[float, float]] = None
    r_squared: Optional[float] = None
    stderr: Optional[float] = None
    fd_check: list[complex] = Field(default_factory=list, description="finite-difference N! a_N")
    smallness: Optional[SmallnessBound] = None
    xi: Optional[complex] = None
    z: Optional[complex] = None

    @model_validator(mode="after")
    def check_slope_support(self) -> "ExpansionReport":
        if self.slope is not None and not slope_supported([dw for dw, _ in self.remainder_samples]):
            raise ValueError("slope needs >= 4 remainder samples spanning a decade in delta omega")
        return self


def slope_supported(delta_omegas: list[float]) -> bool:
    nonzero = sorted(abs(dw) for dw in delta_omegas if dw != 0.0)
    return len(nonzero) >= MIN_SLOPE_SAMPLES and nonzero[-1] >= MIN_SPAN_RATIO * nonzero[0] * (1.0 - 1e-9)

"""격자와 스펙트럼 모델(Grid and spectrum models)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator


class BoxGrid(BaseModel):
    """디리클레 상자 격자(Dirichlet box grid).

    Interior points x_i = -L/2 + i h, i = 1..n, per axis; h (n + 1) = L.
    The box is centred on the origin of the symmetric gauge.
    """

    model_config = ConfigDict(frozen=True)

    L: float = Field(..., gt=0.0, description="상자 한 변 길이(Side length)")
    n: int = Field(..., description="축당 내부 격자점 수(Interior points per side)")
    dim: int = Field(default=2, description="차원 2 또는 3, 1은 종방향 블록(Dimension)")

    @field_validator("n")
    @classmethod
    def check_n(cls, v: int) -> int:
        if v < 4:
            raise ValueError("grid needs at least 4 interior points per side")
        return v

    @field_validator("dim")
    @classmethod
    def check_dim(cls, v: int) -> int:
        # dim 1 only labels the free longitudinal block
        if v not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        return v

    @property
    def h(self) -> float:
        return self.L / (self.n + 1)

    @property
    def volume(self) -> float:
        return self.L**self.dim

    @property
    def weight(self) -> float:
        """Quadrature weight h^dim of one grid point."""
        return self.h**self.dim

    def axis(self) -> NDArray[np.float64]:
        return -0.5 * self.L + self.h * np.arange(1, self.n + 1, dtype=float)

    def points(self) -> NDArray[np.float64]:
        """(n^2, 2) in-plane coordinates, 'ij' ravel order (x1 major)."""
        x = self.axis()
        x1, x2 = np.meshgrid(x, x, indexing="ij")
        return np.column_stack([x1.ravel(), x2.ravel()])

    def plane(self) -> "BoxGrid":
        """The 2D magnetic cross-section of this grid."""
        return self if self.dim == 2 else self.model_copy(update={"dim": 2})

    def solid(self) -> "BoxGrid":
        return self if self.dim == 3 else self.model_copy(update={"dim": 3})

    def with_size(self, L: float, n: Optional[int] = None) -> "BoxGrid":
        return self.model_copy(update={"L": float(L), "n": int(n if n is not None else self.n)})

    @classmethod
    def with_spacing(cls, L: float, h: float, dim: int = 2) -> "BoxGrid":
        """Grid of side L whose spacing is as close as possible to h."""
        return cls(L=L, n=max(4, int(round(L / h)) - 1), dim=dim)

    def label(self) -> str:
        return f"L={self.L:g},n={self.n},dim={self.dim}"


@dataclass(frozen=True)
class Spectrum:
    """정렬된 고유값(Sorted eigenvalues with provenance)."""

    eigenvalues: NDArray[np.float64]
    grid: BoxGrid
    omega: float
    tail_estimate: float = 0.0

    def __post_init__(self) -> None:
        values = np.sort(np.asarray(self.eigenvalues, dtype=float))
        values.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)

    def __len__(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def ground(self) -> float:
        return float(self.eigenvalues[0]) if self.eigenvalues.size else math.inf

    @property
    def volume(self) -> float:
        return self.grid.volume

    def boltzmann_weights(self, beta: float) -> NDArray[np.float64]:
        return np.exp(-beta * self.eigenvalues)

    def boltzmann_trace(self, beta: float) -> float:
        return float(np.sum(self.boltzmann_weights(beta)))

    @classmethod
    def from_levels(cls, levels: list[float] | NDArray[np.float64], grid: BoxGrid, omega: float = 0.0) -> "Spectrum":
        """Toy spectrum from explicit levels."""
        return cls(np.asarray(levels, dtype=float), grid, omega)


@dataclass(frozen=True)
class EigenSystem:
    """고유쌍(Eigenpairs of one Hamiltonian); columns of ``vectors`` are eigenvectors."""

    values: NDArray[np.float64]
    vectors: NDArray[np.complex128]
    grid: BoxGrid
    omega: float

    def function(self, fn_values: NDArray[np.generic]) -> NDArray[np.complex128]:
        """V diag(fn_values) V^dagger."""
        return (self.vectors * fn_values[None, :]) @ self.vectors.conj().T

    def spectrum(self) -> Spectrum:
        return Spectrum(self.values, self.grid, self.omega)


@dataclass(frozen=True)
class MagneticHamiltonian:
    """피어스 위상 해밀토니안(Peierls-phase Hamiltonian on the 2D plane).

    ``links`` holds, per axis, the forward hop index pairs and the line
    integrals theta = int_r^{r+h e_mu} (a + grad chi) . dl.
    """

    matrix: NDArray[np.complex128]
    grid: BoxGrid
    omega: float
    links: tuple[tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]], ...] = field(repr=False)
    gauge: Optional[str] = None

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    def hopping_blocks(self) -> tuple[tuple[NDArray[np.complex128], NDArray[np.complex128]], ...]:
        """(T+_mu, T-_mu) per axis: unit forward and backward hops with link phases."""
        blocks = []
        for src, dst, theta in self.links:
            forward = np.zeros((self.size, self.size), dtype=complex)
            forward[src, dst] = np.exp(-1j * self.omega * theta)
            blocks.append((forward, forward.conj().T))
        return tuple(blocks)

    def d_omega(self) -> NDArray[np.complex128]:
        """dH/domega: every hop multiplied by -i theta."""
        out = np.zeros((self.size, self.size), dtype=complex)
        scale = -0.5 / self.grid.h**2
        for src, dst, theta in self.links:
            entry = scale * (-1j * theta) * np.exp(-1j * self.omega * theta)
            out[src, dst] = entry
            out[dst, src] = entry.conj()
        return out

"""격자 커널 서비스(Heat kernels, magnetic phases and regularized kernels on the plane grid).

Kernels are kept as continuum samples k(x_i, x_j); the operator acting on
grid functions is h^2 k. The symmetric-gauge phase is
phi(x, x') = 1/2 (x2 x1' - x1 x2'), and the lattice hop x -> y of H(omega)
carries exactly exp(i omega phi(x, y)), so H(omega0 + dw) is the entrywise
product of exp(i dw phi) with H(omega0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import linalg, stats

from common_lib.cache import EigenCache
from common_lib.errors import DomainError, InvalidInputError, NumericalError
from common_lib.logger import get_logger
from spectrum.app.models import BoxGrid, EigenSystem
from spectrum.app.service import build_magnetic_hamiltonian_2d, eigen_system

from .models import DecayFit, FluxChain, GridKernel

logger = get_logger(__name__)

RELATION_TOL = 1e-10
# entries below this fraction of the row maximum are floating-point noise
DECAY_FLOOR = 1e-12


def magnetic_phase(x: Sequence[float], x2: Sequence[float]) -> float:
    """phi(x, x') = 1/2 (x2 x1' - x1 x2'); a third coordinate is ignored."""
    return 0.5 * (x[1] * x2[0] - x[0] * x2[1])


def flux_triangle(x: Sequence[float], y: Sequence[float], x2: Sequence[float]) -> float:
    """삼각형 자기 플럭스(Flux through the triangle x, y, x')."""
    return magnetic_phase(x, y) + magnetic_phase(y, x2) + magnetic_phase(x2, x)


def flux_chain(c: FluxChain) -> float:
    """fl_n(x, y_1..y_n) = phi(x, y_1) + phi(y_1, y_2) + ... + phi(y_n, x)."""
    points = [c.base, *c.chain, c.base]
    return float(sum(magnetic_phase(a, b) for a, b in zip(points[:-1], points[1:])))


def require_plane(grid: BoxGrid) -> None:
    if grid.dim != 2:
        raise InvalidInputError("grid.dim", "kernels are built on the 2D cross-section", {"dim": grid.dim})


@dataclass(frozen=True)
class PlaneGeometry:
    """격자 기하(Phase matrix, potential differences and hop factors at omega0).

    ``potential`` holds a_mu(x_i - x_j) per axis; ``hops`` holds per axis the
    forward index pairs with the link factor exp(i omega0 phi(src, dst)).
    """

    grid: BoxGrid
    omega0: float
    phase: NDArray[np.float64]
    potential: tuple[NDArray[np.float64], NDArray[np.float64]]
    hops: tuple[tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.complex128]], ...]

    def phase_factor(self, delta_omega: float) -> NDArray[np.complex128]:
        return np.exp(1j * delta_omega * self.phase)

    def hop(self, matrix: NDArray[np.generic], axis: int, forward: bool) -> NDArray[np.complex128]:
        """Rows of (T_mu^+ M) or (T_mu^- M): one lattice step along ``axis`` with its link factor."""
        src, dst, factor = self.hops[axis]
        out = np.zeros(matrix.shape, dtype=complex)
        if forward:
            out[src] = factor[:, None] * matrix[dst]
        else:
            out[dst] = factor.conj()[:, None] * matrix[src]
        return out


@lru_cache(maxsize=16)
def plane_geometry(grid: BoxGrid, omega0: float) -> PlaneGeometry:
    require_plane(grid)
    points = grid.points()
    x1, x2 = points[:, 0], points[:, 1]
    phase = 0.5 * (x2[:, None] * x1[None, :] - x1[:, None] * x2[None, :])
    potential = (-0.5 * (x2[:, None] - x2[None, :]), 0.5 * (x1[:, None] - x1[None, :]))
    H = build_magnetic_hamiltonian_2d(grid, omega0)
    hops = tuple((src, dst, np.exp(-1j * omega0 * theta)) for src, dst, theta in H.links)
    for array in (phase, *potential):
        array.setflags(write=False)
    return PlaneGeometry(grid=grid, omega0=float(omega0), phase=phase, potential=potential, hops=hops)


def semigroup_operator(system: EigenSystem, t: float) -> NDArray[np.complex128]:
    """e^{-tH} as an operator matrix, reusing one eigendecomposition."""
    return system.function(np.exp(-t * system.values))


def heat_kernel_grid(grid: BoxGrid, beta: float, omega: float, cache: Optional[EigenCache] = None) -> GridKernel:
    """열핵(Kernel G(x, x', beta, omega) of e^{-beta H} on the plane grid)."""
    require_plane(grid)
    if beta <= 0:
        raise InvalidInputError("beta", "must be positive", {"beta": beta})
    system = eigen_system(grid, omega, cache=cache)
    return GridKernel.from_operator(semigroup_operator(system, beta), grid, f"G(beta={beta:g},omega={omega:g})")


def free_heat_kernel(grid: BoxGrid, beta: float) -> GridKernel:
    """G_inf(x, x', beta, 0) = (2 pi beta)^{-dim/2} exp(-|x - x'|^2 / (2 beta)) sampled on the box."""
    points = grid.points()
    dist2 = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    values = np.exp(-dist2 / (2.0 * beta)) / (2.0 * math.pi * beta) ** (grid.dim / 2)
    return GridKernel(values.astype(complex), grid, f"G_inf(beta={beta:g})")


def schur_holmgren_norm(k: GridKernel) -> float:
    """Schur-Holmgren 상한(sqrt(sup_x' h^d sum_x |k| * sup_x h^d sum_x' |k|))."""
    absolute = np.abs(k.values) * k.grid.weight
    return float(math.sqrt(np.max(absolute.sum(axis=0)) * np.max(absolute.sum(axis=1))))


def g_kernel(
    grid: BoxGrid,
    beta: float,
    omega: float,
    xi: complex,
    z: complex,
    cache: Optional[EigenCache] = None,
) -> GridKernel:
    """g = (xi - zW)^{-1} zW computed spectrally; the defining relation is verified."""
    require_plane(grid)
    system = eigen_system(grid, omega, cache=cache)
    zw = z * np.exp(-beta * system.values)
    gaps = np.abs(xi - zw)
    if gaps.min() <= 1e-12 * max(1.0, abs(xi)):
        raise DomainError("xi", "xi - zW is singular", {"xi": str(xi), "z": str(z), "min_gap": float(gaps.min())})
    g = system.function(zw / (xi - zw))
    W = semigroup_operator(system, beta)
    residual = float(linalg.norm((xi * g - z * (W @ g)) - z * W, 2))
    if residual > RELATION_TOL * max(1.0, float(linalg.norm(g, 2))):
        raise NumericalError("g_kernel", "(xi - zW) g = zW not satisfied", {"residual": residual})
    return GridKernel.from_operator(g, grid, f"g(xi={xi},z={z})")


def regularize(k: GridKernel, delta_omega: float) -> GridKernel:
    """Entrywise exp(i dw phi(x, x')) k(x, x'); diagonal and trace are unchanged."""
    if delta_omega == 0.0:
        return k
    geometry = plane_geometry(k.grid, 0.0)
    return GridKernel(geometry.phase_factor(delta_omega) * k.values, k.grid, f"reg[{k.label}]")


def decay_fit(k: GridKernel, center: Optional[int] = None, max_distance: Optional[float] = None) -> DecayFit:
    """Fit log|k(x0, x')| against |x0 - x'| along the row of x0 (box centre by default).

    Only entries within ``max_distance`` (L/4 by default) enter, away from the Dirichlet wall.
    """
    points = k.grid.points()
    if center is None:
        center = int(np.argmin(np.sum(points**2, axis=1)))
    row = np.abs(k.values[center])
    dist = np.linalg.norm(points - points[center], axis=1)
    window = 0.25 * k.grid.L if max_distance is None else max_distance
    mask = (row > DECAY_FLOOR * row.max()) & (dist > 0) & (dist <= window)
    if mask.sum() < 3:
        raise NumericalError("decay_fit", "not enough resolved off-diagonal entries", {"samples": int(mask.sum())})
    fit = stats.linregress(dist[mask], np.log(row[mask]))
    return DecayFit(rate=float(-fit.slope), intercept=float(fit.intercept), r_squared=float(fit.rvalue**2), samples=int(mask.sum()))


def gauge_conjugation_check(k: GridKernel, delta_omega: float, c: Sequence[float] = (0.0, 0.0)) -> float:
    """Largest eigenvalue shift after conjugating by the diagonal unitary exp(i dw phi(x, c))."""
    points = k.grid.points()
    u = np.exp(1j * delta_omega * 0.5 * (points[:, 1] * c[0] - points[:, 0] * c[1]))
    operator = k.operator
    conjugated = u[:, None] * operator * u.conj()[None, :]
    before = linalg.eigvalsh(0.5 * (operator + operator.conj().T))
    after = linalg.eigvalsh(0.5 * (conjugated + conjugated.conj().T))
    return float(np.max(np.abs(before - after)))


def semigroup_defect(grid: BoxGrid, beta1: float, beta2: float, omega: float, cache: Optional[EigenCache] = None) -> float:
    """||W(beta1) W(beta2) - W(beta1 + beta2)|| with the h^2-weighted composition."""
    product = heat_kernel_grid(grid, beta1, omega, cache).compose(heat_kernel_grid(grid, beta2, omega, cache))
    target = heat_kernel_grid(grid, beta1 + beta2, omega, cache)
    return float(linalg.norm(product.operator - target.operator, 2))

"""자기 슈뢰딩거 연산자 서비스(Magnetic Schrodinger operator service).

H = 1/2 (-i grad - omega a)^2 on the Dirichlet box, symmetric gauge
a(x) = 1/2 (-x2, x1), discretised with second-order differences and
Peierls link phases H[r, r'] = -1/(2 h^2) exp(-i omega int_r^{r'} a . dl).
For straight links the symmetric-gauge integral is exact and equals
1/2 (r1 r2' - r2 r1') = phi(r', r) = -phi(r, r'), with phi(x, x') = 1/2 (x2 x1' - x1 x2'),
so H[r, r'] = -1/(2 h^2) exp(i omega phi(r, r')).
"""
from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray
from scipy import linalg, sparse

from common_lib.cache import EigenCache, cache_key, get_eigen_cache
from common_lib.config import get_settings
from common_lib.errors import InvalidInputError, NumericalError
from common_lib.logger import get_logger
from common_lib.retry_config import NonFiniteResult, ensure_finite, get_eigensolver_retrying

from .models import BoxGrid, EigenSystem, MagneticHamiltonian, Spectrum

logger = get_logger(__name__)

GaugeFunction = Callable[[NDArray[np.float64], NDArray[np.float64]], NDArray[np.float64]]

_SUBSET_DRIVERS = {"evr", "evx"}


def _require_plane(grid: BoxGrid) -> None:
    if grid.dim != 2:
        raise InvalidInputError("grid.dim", "the magnetic block is built on the 2D cross-section")


def _links(grid: BoxGrid, gauge_chi: Optional[GaugeFunction]):
    """Forward links per axis with their vector-potential line integrals."""

    n, h = grid.n, grid.h
    x = grid.axis()
    index = np.arange(n * n).reshape(n, n)
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    links = []
    # axis 0 (x1): a_1 = -x2/2 is constant along the link
    src, dst = index[:-1, :].ravel(), index[1:, :].ravel()
    theta = (-0.5 * h * x2[:-1, :]).ravel()
    links.append((src, dst, theta))
    # axis 1 (x2): a_2 = x1/2
    src, dst = index[:, :-1].ravel(), index[:, 1:].ravel()
    theta = (0.5 * h * x1[:, :-1]).ravel()
    links.append((src, dst, theta))
    if gauge_chi is not None:
        chi = np.asarray(gauge_chi(x1, x2), dtype=float).ravel()
        links = [(s, d, t + chi[d] - chi[s]) for s, d, t in links]
    return tuple(links)


def build_magnetic_hamiltonian_2d(
    grid: BoxGrid,
    omega: float,
    gauge_chi: Optional[GaugeFunction] = None,
    gauge_label: Optional[str] = None,
) -> MagneticHamiltonian:
    """2차원 자기 해밀토니안(2D magnetic Hamiltonian with Peierls phases).

    Args:
        grid: 2D box grid (n >= 4)
        omega: Field strength
        gauge_chi: Optional scalar chi(x1, x2); links then integrate a + grad chi exactly
        gauge_label: Cache/provenance label for the gauge
    """

    _require_plane(grid)
    links = _links(grid, gauge_chi)
    size = grid.n**2
    scale = -0.5 / grid.h**2
    rows, cols, vals = [], [], []
    for src, dst, theta in links:
        hop = scale * np.exp(-1j * omega * theta)
        rows += [src, dst]
        cols += [dst, src]
        vals += [hop, hop.conj()]
    off_diagonal = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )
    matrix = (off_diagonal + sparse.identity(size, format="coo") * (grid.dim / grid.h**2)).toarray()
    return MagneticHamiltonian(
        matrix=np.ascontiguousarray(matrix, dtype=complex),
        grid=grid,
        omega=float(omega),
        links=links,
        gauge=gauge_label if gauge_chi is not None else None,
    )


def build_free_hamiltonian_1d(L: float, n: int) -> NDArray[np.float64]:
    """1차원 자유 디리클레 블록(1D free Dirichlet block) -1/2 d^2/dx^2."""

    if n < 4:
        raise InvalidInputError("n", "grid needs at least 4 interior points")
    h = L / (n + 1)
    band = np.full(n - 1, -0.5 / h**2)
    return sparse.diags([band, np.full(n, 1.0 / h**2), band], offsets=[-1, 0, 1]).toarray()


def _solve(matrix: NDArray[np.generic], count: int, driver: str, vectors: bool):
    if driver in _SUBSET_DRIVERS and count < matrix.shape[0]:
        return linalg.eigh(matrix, eigvals_only=not vectors, subset_by_index=[0, count - 1], driver=driver)
    result = linalg.eigh(matrix, eigvals_only=not vectors, driver=driver)
    if vectors:
        values, vecs = result
        return values[:count], vecs[:, :count]
    return result[:count]


def _check_residual(matrix: NDArray[np.generic], values: NDArray[np.float64], vecs: NDArray[np.generic]) -> float:
    residual = matrix @ vecs - vecs * values[None, :]
    worst = float(np.max(np.linalg.norm(residual, axis=0) / np.linalg.norm(vecs, axis=0)))
    scale = max(1.0, float(np.max(np.abs(values))))
    tol = get_settings().eigen_residual_tol * scale
    if worst > tol:
        raise linalg.LinAlgError(f"eigenpair residual {worst:.2e} exceeds {tol:.2e}")
    return worst


def diagonalize(matrix: NDArray[np.generic], count: Optional[int] = None, vectors: bool = True):
    """밀집 고유분해(Dense Hermitian eigendecomposition with driver fallback).

    Each attempt uses the next LAPACK driver; LinAlgError, non-finite output
    and residual failures move on to the next one.
    """

    size = matrix.shape[0]
    count = size if count is None else int(count)
    drivers = get_settings().driver_list
    try:
        for attempt in get_eigensolver_retrying(drivers):
            with attempt:
                driver = drivers[attempt.retry_state.attempt_number - 1]
                if attempt.retry_state.attempt_number > 1:
                    logger.warning("고유값 드라이버 폴백(Eigensolver fallback) -> %s", driver)
                # vectors are needed for the residual check either way
                values, vecs = _solve(matrix, count, driver, vectors=True)
                ensure_finite(values, vecs)
                _check_residual(matrix, values, vecs)
    except (linalg.LinAlgError, NonFiniteResult) as exc:
        raise NumericalError("eigen_spectrum", str(exc), {"drivers": drivers, "size": size}) from exc
    return (values, vecs) if vectors else values


def eigen_spectrum(
    H: MagneticHamiltonian | NDArray[np.generic],
    count: int,
    grid: Optional[BoxGrid] = None,
    omega: float = 0.0,
) -> Spectrum:
    """최저 고유값(Lowest ``count`` eigenvalues) as a Spectrum."""

    matrix = H.matrix if isinstance(H, MagneticHamiltonian) else np.asarray(H)
    if isinstance(H, MagneticHamiltonian):
        grid, omega = H.grid, H.omega
    if grid is None:
        raise InvalidInputError("grid", "a raw matrix needs its grid for provenance")
    size = matrix.shape[0]
    if count < 0 or count > size:
        raise InvalidInputError("count", f"must lie in [0, {size}]", {"count": count})
    if count == 0:
        return Spectrum(np.zeros(0), grid, omega)
    values = diagonalize(matrix, count, vectors=False)
    return Spectrum(values, grid, omega)


def eigen_system(
    grid: BoxGrid,
    omega: float,
    cache: Optional[EigenCache] = None,
    gauge_chi: Optional[GaugeFunction] = None,
    gauge_label: Optional[str] = None,
) -> EigenSystem:
    """캐시된 고유쌍(Cached full eigendecomposition of the 2D block)."""

    plane = grid.plane()
    if gauge_chi is not None and gauge_label is None:
        raise InvalidInputError("gauge_label", "a gauge function needs a label for caching")
    store = cache if cache is not None else get_eigen_cache()
    key = cache_key("eig2d", plane.L, plane.n, 2, omega, gauge_label)

    def factory() -> EigenSystem:
        H = build_magnetic_hamiltonian_2d(plane, omega, gauge_chi, gauge_label)
        values, vecs = diagonalize(H.matrix)
        values.setflags(write=False)
        vecs.setflags(write=False)
        return EigenSystem(values=values, vectors=vecs, grid=plane, omega=float(omega))

    return store.get_or_compute(key, factory)


def dirichlet_levels_1d(L: float, count: int) -> NDArray[np.float64]:
    k = np.arange(1, count + 1, dtype=float)
    return (math.pi * k / L) ** 2 / 2.0


def _gaussian_tail_ratio(alpha: float, kept: int) -> float:
    """sum_{k>K} e^{-alpha k^2} / sum_{k<=K} e^{-alpha k^2}, bounded geometrically."""

    if kept <= 0:
        return math.inf
    first = math.exp(-alpha * (kept + 1) ** 2)
    ratio = math.exp(-alpha * (2 * kept + 3))
    tail = first / (1.0 - ratio) if ratio < 1.0 else math.inf
    head = float(np.sum(np.exp(-alpha * np.arange(1, kept + 1, dtype=float) ** 2)))
    return tail / head


def assemble_3d_spectrum(
    levels2d: Spectrum,
    grid: BoxGrid,
    n3max: int,
    beta: Optional[float] = None,
    count: Optional[int] = None,
) -> Spectrum:
    """3차원 스펙트럼 조립(3D spectrum = 2D magnetic levels + free longitudinal levels).

    Args:
        levels2d: Spectrum of the magnetic cross-section at the same L
        grid: Target grid (dim 3 is enforced on the result)
        n3max: Number of longitudinal levels pi^2 k^2 / (2 L^2)
        beta: When given, warn if the omitted longitudinal Boltzmann weight exceeds the tolerance
        count: Truncate to the lowest ``count`` levels
    """

    if n3max < 1:
        raise InvalidInputError("n3max", "need at least one longitudinal level")
    if abs(levels2d.grid.L - grid.L) > 1e-12 * grid.L:
        raise InvalidInputError("levels2d", "cross-section spectrum belongs to another box size")
    longitudinal = dirichlet_levels_1d(grid.L, n3max)
    values = (levels2d.eigenvalues[:, None] + longitudinal[None, :]).ravel()
    values.sort()
    if count is not None:
        values = values[:count]
    tail = 0.0
    if beta is not None:
        alpha = beta * math.pi**2 / (2.0 * grid.L**2)
        tail = _gaussian_tail_ratio(alpha, n3max)
        if tail > get_settings().boltzmann_coverage_tol:
            logger.warning(
                "종방향 준위 부족(Longitudinal levels truncated): n3max=%d, relative Boltzmann tail %.2e",
                n3max,
                tail,
            )
    grid3 = grid.solid()
    return Spectrum(values, grid3, levels2d.omega, tail_estimate=tail)


def covariant_gradient(grid: BoxGrid, omega: float) -> tuple[NDArray[np.complex128], ...]:
    """공변 중심차분(Central covariant differences) approximating grad - i omega a.

    (D_mu psi)(r) = [U(r, r+h e_mu) psi(r+h e_mu) - U(r, r-h e_mu) psi(r-h e_mu)] / (2h),
    U the Peierls link factor; Dirichlet values vanish.
    """

    _require_plane(grid)
    size = grid.n**2
    out = []
    for src, dst, theta in _links(grid, None):
        phase = np.exp(-1j * omega * theta)
        D = np.zeros((size, size), dtype=complex)
        D[src, dst] = phase / (2.0 * grid.h)
        D[dst, src] = -phase.conj() / (2.0 * grid.h)
        out.append(D)
    return tuple(out)


class SpectrumProvider:
    """3차원 스펙트럼 공급자(3D spectra at any omega through the eigen cache)."""

    def __init__(self, grid: BoxGrid, n3max: Optional[int] = None, cache: Optional[EigenCache] = None) -> None:
        self.grid = grid.solid()
        self.n3max = n3max or grid.n
        self._cache = cache

    @property
    def volume(self) -> float:
        return self.grid.volume

    def eigen_system(self, omega: float) -> EigenSystem:
        return eigen_system(self.grid, omega, cache=self._cache)

    def spectrum(self, omega: float, beta: Optional[float] = None) -> Spectrum:
        levels2d = self.eigen_system(omega).spectrum()
        return assemble_3d_spectrum(levels2d, self.grid, self.n3max, beta=beta)

    def spectrum_with_slopes(self, omega: float) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """3D energies and dE/domega (Hellmann-Feynman on the 2D block), unsorted pairs."""

        system = self.eigen_system(omega)
        H = build_magnetic_hamiltonian_2d(system.grid, omega)
        dH = H.d_omega()
        slopes2d = np.real(np.sum(system.vectors.conj() * (dH @ system.vectors), axis=0))
        longitudinal = dirichlet_levels_1d(self.grid.L, self.n3max)
        energies = (system.values[:, None] + longitudinal[None, :]).ravel()
        slopes = np.repeat(slopes2d, longitudinal.size)
        return energies, slopes

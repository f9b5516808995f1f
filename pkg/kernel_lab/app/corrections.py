"""보정 커널(Correction kernels R1, R2, r_{L,N} and the resolvent identity).

With W0 = e^{-tH(omega0)} and Phi = exp(i dw phi), the lattice identity

    (d/dt + H(omega)) (Phi o W0) = Phi o sum_{m>=1} dw^m rho_m(t),
    rho_m(x, x') = i^m/m! sum_y fl(x, y, x')^m H0(x, y) W0(y, x'),

holds exactly because H(omega) = Phi o H(omega0). rho_1 coincides with
R1 = a(x - x') . [i grad + omega0 a(x)] G built from the covariant central
difference, rho_2 is the link-symmetrised 1/2 a(x - x')^2 G, and the terms
m >= 3 are O(h).
"""
from __future__ import annotations

import math
from itertools import product
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy import linalg

from common_lib.cache import EigenCache
from common_lib.errors import InvalidInputError, UnsupportedMethodError
from common_lib.logger import get_logger
from spectrum.app.models import BoxGrid
from spectrum.app.service import covariant_gradient, eigen_system

from .kernels import PlaneGeometry, plane_geometry, require_plane, semigroup_operator
from .models import GridKernel

logger = get_logger(__name__)

CORRECTIONS = ("R1", "R2", "rN")


def lattice_correction(geometry: PlaneGeometry, w0: NDArray[np.complex128], m: int) -> NDArray[np.complex128]:
    """rho_m as an operator matrix, from the two hops per axis of H(omega0)."""
    if m < 1:
        raise InvalidInputError("m", "correction order starts at 1", {"m": m})
    h = geometry.grid.h
    out = np.zeros(w0.shape, dtype=complex)
    for axis, a in enumerate(geometry.potential):
        # y = x + h e_mu gives fl = -h a_mu(x - x'); y = x - h e_mu gives +h a_mu(x - x')
        out += (-h * a) ** m * geometry.hop(w0, axis, forward=True)
        out += (h * a) ** m * geometry.hop(w0, axis, forward=False)
    return (1j**m / math.factorial(m)) * (-0.5 / h**2) * out


def _trinomial(k: int):
    for a, b in product(range(k + 1), repeat=2):
        if a + b <= k:
            yield a, b, k - a - b


def flux_correction(
    geometry: PlaneGeometry,
    w0: NDArray[np.complex128],
    g0: NDArray[np.complex128],
    z: complex,
    k: int,
) -> NDArray[np.complex128]:
    """r_{L,k} = -z sum_y (i fl(x, y, x'))^k / k! W0(x, y) g0(y, x') as an operator matrix.

    fl(x, y, x') = phi(x, y) + phi(y, x') - phi(x, x') is expanded trinomially so
    every term is one matrix product.
    """
    if k < 1:
        raise InvalidInputError("N", "r_{L,N} starts at N = 1", {"N": k})
    P = geometry.phase
    total = np.zeros(w0.shape, dtype=complex)
    for a, b, c in _trinomial(k):
        coeff = 1.0 / (math.factorial(a) * math.factorial(b) * math.factorial(c))
        total += coeff * (-P) ** c * ((P**a * w0) @ (P**b * g0))
    return -z * 1j**k * total


def flux_remainder(
    geometry: PlaneGeometry,
    w0: NDArray[np.complex128],
    g0: NDArray[np.complex128],
    z: complex,
    delta_omega: float,
) -> NDArray[np.complex128]:
    """r_L = -z sum_y (exp(i dw fl) - 1) W0 g0, summed in closed form."""
    Phi = geometry.phase_factor(delta_omega)
    return -z * (Phi.conj() * ((Phi * w0) @ (Phi * g0)) - w0 @ g0)


def _g_operator(system, beta: float, xi: complex, z: complex) -> NDArray[np.complex128]:
    zw = z * np.exp(-beta * system.values)
    return system.function(zw / (xi - zw))


def correction_kernels(
    grid: BoxGrid,
    beta: float,
    omega0: float,
    which: str,
    *,
    order: int = 1,
    xi: Optional[complex] = None,
    z: Optional[complex] = None,
    cache: Optional[EigenCache] = None,
) -> GridKernel:
    """보정 커널(R1, R2 or r_{L,N} at omega0).

    Args:
        which: "R1", "R2" or "rN"
        order: N for "rN"
        xi, z: Resolvent parameters, required for "rN"
    """
    require_plane(grid)
    if which not in CORRECTIONS:
        raise UnsupportedMethodError(which, f"expected one of {CORRECTIONS}")
    system = eigen_system(grid, omega0, cache=cache)
    W0 = semigroup_operator(system, beta)
    geometry = plane_geometry(grid, omega0)
    if which == "R1":
        gradients = covariant_gradient(grid, omega0)
        operator = sum(a * (1j * (D @ W0)) for a, D in zip(geometry.potential, gradients))
        return GridKernel.from_operator(operator, grid, "R1")
    if which == "R2":
        a1, a2 = geometry.potential
        return GridKernel.from_operator(0.5 * (a1**2 + a2**2) * W0, grid, "R2")
    if xi is None or z is None:
        raise InvalidInputError("xi", "r_{L,N} needs the g kernel, give both xi and z")
    g0 = _g_operator(system, beta, xi, z)
    return GridKernel.from_operator(flux_correction(geometry, W0, g0, z, order), grid, f"r{order}")


def r_hat(
    grid: BoxGrid,
    beta: float,
    omega0: float,
    xi: complex,
    z: complex,
    delta_omega: float,
    cache: Optional[EigenCache] = None,
) -> GridKernel:
    """r^_L = exp(i dw phi(x, x')) r_L(x, x')."""
    system = eigen_system(grid, omega0, cache=cache)
    geometry = plane_geometry(grid, omega0)
    W0 = semigroup_operator(system, beta)
    rL = flux_remainder(geometry, W0, _g_operator(system, beta, xi, z), z, delta_omega)
    return GridKernel.from_operator(geometry.phase_factor(delta_omega) * rL, grid, "r_hat")


def regularize_reference(
    grid: BoxGrid,
    beta: float,
    omega0: float,
    xi: complex,
    z: complex,
    delta_omega: float,
    cache: Optional[EigenCache] = None,
) -> GridKernel:
    """Phase-regularization of the omega0 kernel of r_L, which vanishes; r_hat does not."""
    system = eigen_system(grid, omega0, cache=cache)
    geometry = plane_geometry(grid, omega0)
    W0 = semigroup_operator(system, beta)
    at_reference = flux_remainder(geometry, W0, _g_operator(system, beta, xi, z), z, 0.0)
    return GridKernel.from_operator(geometry.phase_factor(delta_omega) * at_reference, grid, "reg[r_L]")


def resolvent_identity_residual(
    grid: BoxGrid,
    beta: float,
    omega0: float,
    xi: complex,
    z: complex,
    delta_omega: float,
    cache: Optional[EigenCache] = None,
) -> float:
    """||(xi - z W~) g~ - z W~ - r^|| in operator norm."""
    system = eigen_system(grid, omega0, cache=cache)
    geometry = plane_geometry(grid, omega0)
    Phi = geometry.phase_factor(delta_omega)
    W0 = semigroup_operator(system, beta)
    g0 = _g_operator(system, beta, xi, z)
    W_reg, g_reg = Phi * W0, Phi * g0
    rhat = Phi * flux_remainder(geometry, W0, g0, z, delta_omega)
    residual = xi * g_reg - z * (W_reg @ g_reg) - z * W_reg - rhat
    value = float(linalg.norm(residual, 2))
    logger.debug("레졸벤트 항등식 잔차(Resolvent identity residual) dw=%g: %.3e", delta_omega, value)
    return value

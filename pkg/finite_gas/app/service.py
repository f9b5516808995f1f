"""유한 부피 압력과 감수율 서비스(Finite-volume pressure and susceptibility service).

Two equivalent routes to the grand-canonical pressure of a finite box:

    eigenvalue sum   P_L = -eps (beta V)^-1 sum_k ln(1 - eps z e^{-beta E_k})
    contour integral P_L = -eps (2 pi i beta V)^-1  contour_int dxi xi^-1 ln(1 - eps xi) Tr[(xi - zW)^-1 zW]

with W = e^{-beta H}. The contour is a circle |xi| = r enclosing the spectrum
of zW and leaving the branch point xi = eps outside.
"""
from __future__ import annotations

import math
from typing import Callable, Optional, Union

import numpy as np
from numpy.typing import NDArray

from bulk.app.models import SusceptibilityResult, ThermoParams
from common_lib.config import get_settings
from common_lib.errors import (
    ContourInfeasibleError,
    DomainError,
    InvalidInputError,
    NumericalError,
    UnsupportedMethodError,
)
from common_lib.logger import get_logger
from common_lib.numerics import richardson_derivative, stencil_points, sweep_derivative
from spectrum.app.models import Spectrum
from spectrum.app.service import SpectrumProvider

from .models import CauchyRiemann, Contour, FugacityCompact, PressureSummary, TraceNormCheck

logger = get_logger(__name__)

TraceFunction = Callable[[complex], complex]

METHODS = ("eig_fd", "contour_fd", "hellmann")
MIN_STEP = 1e-8
# levels per block when the spectral trace is evaluated on all contour nodes
_CHUNK = 8192


def _check_fugacity(p: ThermoParams) -> None:
    margin = get_settings().cut_margin
    distance = p.cut_distance()
    if distance < margin:
        raise DomainError(
            "z",
            f"fugacity within {distance:.3e} of the cut starting at {p.cut_start:.6g}",
            {"z": [p.z.real, p.z.imag], "distance": distance, "margin": margin},
        )


def _check_same_point(spec: Spectrum, beta: float, omega: float) -> None:
    if abs(spec.omega - omega) > 1e-12 * max(1.0, abs(omega)):
        raise InvalidInputError(
            "omega", "spectrum and parameters belong to different fields", {"spectrum": spec.omega, "params": omega}
        )
    if beta <= 0:
        raise InvalidInputError("beta", "inverse temperature must be positive")


def eigsum_summary(spec: Spectrum, p: ThermoParams) -> PressureSummary:
    """고유값 합 압력(Eigenvalue-sum pressure with the conditioning min_k |1 - eps z e^{-beta E_k}|)."""

    _check_fugacity(p)
    if p.z == 0 or len(spec) == 0:
        return PressureSummary(0j, 1.0, len(spec))
    eps = p.eps.epsilon
    arguments = 1.0 - eps * p.z * spec.boltzmann_weights(p.beta)
    # principal log: the cut is arguments on (-inf, 0]
    on_cut = (arguments.real <= 0.0) & (np.abs(arguments.imag) <= 1e-14 * np.abs(arguments))
    if np.any(on_cut):
        level = int(np.argmax(on_cut))
        raise DomainError(
            "z",
            "eps z e^{-beta E_k} lies on the logarithm branch cut",
            {"z": [p.z.real, p.z.imag], "level": level, "energy": float(spec.eigenvalues[level])},
        )
    conditioning = float(np.min(np.abs(arguments)))
    value = complex(-eps * np.sum(np.log(arguments)) / (p.beta * spec.volume))
    logger.debug("고유값 합 압력(Eigensum pressure): %d levels, conditioning %.3e", len(spec), conditioning)
    return PressureSummary(value, conditioning, len(spec))


def pressure_eigsum(spec: Spectrum, p: ThermoParams) -> complex:
    """유한 부피 압력(Finite-volume pressure) as an eigenvalue sum with the principal logarithm."""

    return eigsum_summary(spec, p).value


def _ground_weight(spec: Spectrum, beta: float) -> float:
    return math.exp(-beta * spec.ground) if len(spec) else 0.0


def build_contour(
    K: FugacityCompact,
    beta: float,
    omega: float,
    spec: Spectrum,
    n_nodes: Optional[int] = None,
    radius: Optional[float] = None,
) -> Contour:
    """윤곽 생성(Circle contour admissible for every z in K).

    Needs max_K |z| e^{-beta E_0} + gap <= r <= 1 - gap; the default radius is
    the midpoint of that interval.

    Raises:
        ContourInfeasibleError: The spectral radius is too close to the branch point
    """

    settings = get_settings()
    gap = settings.contour_gap
    nodes = int(n_nodes or settings.contour_nodes)
    if nodes < 8:
        raise InvalidInputError("n_nodes", "need at least 8 contour nodes", {"n_nodes": nodes})
    if abs(K.beta - beta) > 1e-12 * beta or abs(K.omega - omega) > 1e-12 * max(1.0, omega):
        raise InvalidInputError("K", "compact carries a different (beta, omega)")
    K.check_domain()
    required = K.sup_abs * _ground_weight(spec, beta)
    lower, upper = required + gap, 1.0 - gap
    diagnostics = {"required_radius": required, "gap": gap, "ground": spec.ground, "sup_z": K.sup_abs}
    if lower > upper:
        raise ContourInfeasibleError("spectral radius of zW too close to the branch point", diagnostics)
    r = 0.5 * (lower + upper) if radius is None else float(radius)
    if not lower <= r <= upper:
        raise ContourInfeasibleError(f"radius {r} outside [{lower:.6g}, {upper:.6g}]", diagnostics)
    logger.debug("윤곽 생성(Contour built): r=%.6g, nodes=%d, required=%.6g", r, nodes, required)
    return Contour.circle(r, nodes, K.eps)


def _distances_to_ray(nodes: NDArray[np.complex128], z: complex, weights_sorted: NDArray[np.float64]):
    """min_k |xi - z w_k| for every node; w sorted ascending."""

    if z == 0:
        return np.abs(nodes)
    # |xi - z t|^2 is a parabola in t with vertex at t*
    t_star = (nodes * np.conj(z)).real / abs(z) ** 2
    idx = np.searchsorted(weights_sorted, t_star)
    last = weights_sorted.size - 1
    below = weights_sorted[np.clip(idx - 1, 0, last)]
    above = weights_sorted[np.clip(idx, 0, last)]
    return np.minimum(np.abs(nodes - z * below), np.abs(nodes - z * above))


def resolvent_sup_estimate(spec: Spectrum, K: FugacityCompact, c: Contour) -> float:
    """레졸벤트 상한 M(sup over nodes and K of ||(xi - zW)^-1|| = 1 / min_k |xi - z e^{-beta E_k}|)."""

    if len(spec) == 0:
        raise InvalidInputError("spec", "resolvent estimate needs at least one level")
    _check_same_point(spec, K.beta, K.omega)
    weights = np.sort(spec.boltzmann_weights(K.beta))
    closest = min(float(np.min(_distances_to_ray(c.nodes, z, weights))) for z in K.samples)
    if closest <= 0.0:
        raise ContourInfeasibleError("contour passes through the spectrum of zW", {"radius": c.radius})
    return 1.0 / closest


def _spectral_trace(nodes: NDArray[np.complex128], zw: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Tr[(xi - zW)^-1 zW] = sum_k z w_k / (xi - z w_k) on every node."""

    out = np.zeros(nodes.shape, dtype=complex)
    for start in range(0, zw.size, _CHUNK):
        block = zw[start : start + _CHUNK]
        out += np.sum(block[None, :] / (nodes[:, None] - block[None, :]), axis=1)
    return out


def _check_contour(c: Contour, p: ThermoParams, outermost: float) -> None:
    if c.radius >= 1.0:
        raise ContourInfeasibleError("branch point of ln(1 - eps xi) inside the contour", {"radius": c.radius})
    if outermost >= c.radius:
        raise ContourInfeasibleError(
            "contour does not enclose the spectrum of zW",
            {"radius": c.radius, "spectral_radius": outermost, "z": [p.z.real, p.z.imag]},
        )
    if c.eps is not p.eps:
        raise InvalidInputError("contour", "built for the other statistics")


def pressure_contour(
    source: Union[Spectrum, TraceFunction],
    p: ThermoParams,
    c: Contour,
    volume: Optional[float] = None,
) -> complex:
    """윤곽 적분 압력(Pressure from the contour representation).

    Args:
        source: Spectrum (trace evaluated spectrally) or a callable xi -> Tr[(xi - zW)^-1 zW]
        p: Thermodynamic parameters
        c: Admissible contour
        volume: Box volume, required with a callable source
    """

    _check_fugacity(p)
    if isinstance(source, Spectrum):
        _check_same_point(source, p.beta, p.omega)
        if p.z == 0 or len(source) == 0:
            return 0j
        zw = p.z * source.boltzmann_weights(p.beta)
        _check_contour(c, p, float(np.max(np.abs(zw))))
        trace = _spectral_trace(c.nodes, zw)
        volume = source.volume
    else:
        if volume is None or volume <= 0:
            raise InvalidInputError("volume", "a trace callable needs the box volume")
        if p.z == 0:
            return 0j
        _check_contour(c, p, 0.0)
        trace = np.array([complex(source(xi)) for xi in c.nodes])
    eps = p.eps.epsilon
    integrand = np.log(1.0 - eps * c.nodes) / c.nodes * trace
    return complex(-eps * np.sum(c.weights * integrand) / (2j * math.pi * p.beta * volume))


def candidate_steps(omega: float, order: int) -> list[float]:
    """기하 간격 후보(Geometric step candidates that keep every stencil point at omega > 0)."""

    reach = stencil_points(order) // 2
    base = max(1e-3, 1e-2 * omega)
    steps = [base * 2.0**j for j in range(3) if omega - reach * base * 2.0**j > 0.0]
    if not steps:
        steps = [0.5 * omega / reach]
    if steps[0] < MIN_STEP:
        raise NumericalError("susceptibility_finite", "finite-difference step underflow", {"step": steps[0]})
    return steps


def _hellmann(provider: SpectrumProvider, p: ThermoParams) -> SusceptibilityResult:
    """dP/domega = -(1/V) sum_k n_k dE_k/domega, n_k = z e^{-beta E_k} / (1 - eps z e^{-beta E_k}).

    Slopes dE_k/domega = <psi_k| dH/domega |psi_k> on the magnetic block.
    """

    energies, slopes = provider.spectrum_with_slopes(p.omega)
    zw = p.z * np.exp(-p.beta * energies)
    occupation = zw / (1.0 - p.eps.epsilon * zw)
    value = complex(-np.sum(occupation * slopes) / provider.volume)
    return SusceptibilityResult(value=value, order=1, method="hellmann", error_estimate=0.0, levels=int(energies.size))


def susceptibility_finite(
    provider: SpectrumProvider,
    p: ThermoParams,
    N: int,
    method: str = "eig_fd",
    step: Optional[float] = None,
    n_nodes: Optional[int] = None,
) -> SusceptibilityResult:
    """유한 부피 감수율(Finite-volume susceptibility) d^N P_L / domega^N at fixed (beta, z).

    Args:
        provider: 3D spectra of the box at any omega
        p: Thermodynamic parameters (omega > 0)
        N: Derivative order, 1..susceptibility_max_order
        method: "eig_fd", "contour_fd" or "hellmann" (N = 1 only)
        step: Fixed base step; default is a sweep over candidate_steps
        n_nodes: Contour nodes for contour_fd
    """

    settings = get_settings()
    if N < 1 or N > settings.susceptibility_max_order:
        raise InvalidInputError("N", f"order must lie in [1, {settings.susceptibility_max_order}]", {"N": N})
    if method not in METHODS:
        raise InvalidInputError("method", f"expected one of {METHODS}", {"method": method})
    if method == "hellmann" and N != 1:
        raise UnsupportedMethodError("hellmann", "first-order perturbation gives N = 1 only")
    if p.omega <= 0:
        raise DomainError("omega", "susceptibility needs omega > 0 inside the sweep interval", {"omega": p.omega})
    _check_fugacity(p)
    if method == "hellmann":
        return _hellmann(provider, p)

    def pressure_at(omega: float) -> complex:
        shifted = p.with_omega(omega)
        spec = provider.spectrum(omega)
        if method == "eig_fd":
            return pressure_eigsum(spec, shifted)
        K = FugacityCompact.from_values([p.z], beta=p.beta, omega=omega, eps=p.eps)
        contour = build_contour(K, p.beta, omega, spec, n_nodes)
        return pressure_contour(spec, shifted, contour)

    steps = candidate_steps(p.omega, N) if step is None else [float(step)]
    if steps[0] < MIN_STEP:
        raise NumericalError("susceptibility_finite", "finite-difference step underflow", {"step": steps[0]})
    fd = sweep_derivative(pressure_at, p.omega, N, steps, settings.fd_richardson_levels)
    logger.info(
        "유한 부피 감수율(Finite susceptibility) N=%d method=%s step=%.3g err=%.2e", N, method, fd.step, fd.error
    )
    return SusceptibilityResult(value=fd.value, order=N, method=method, error_estimate=fd.error, step=fd.step)


def one_particle_boltzmann_derivative(
    provider: SpectrumProvider,
    p: ThermoParams,
    N: int,
    step: Optional[float] = None,
) -> complex:
    """z -> 0 기준값(d^N/domega^N [sum_k e^{-beta E_k}] / (beta V)), the limit of chi_L^N / z."""

    def boltzmann_at(omega: float) -> complex:
        return provider.spectrum(omega).boltzmann_trace(p.beta) / (p.beta * provider.volume)

    if N == 0:
        return complex(boltzmann_at(p.omega))
    steps = candidate_steps(p.omega, N) if step is None else [float(step)]
    return sweep_derivative(boltzmann_at, p.omega, N, steps, get_settings().fd_richardson_levels).value


def trace_norm_bound_check(spec: Spectrum, K: FugacityCompact, c: Contour) -> TraceNormCheck:
    """대각합 노름 상한(||g_L(xi)||_1 <= sup_K |z| M sum_k e^{-beta E_k} on the contour).

    Also compares sum_k e^{-beta E_k} with the Gibbs bound V (2 pi beta)^(-dim/2).
    """

    M = resolvent_sup_estimate(spec, K, c)
    weights = spec.boltzmann_weights(K.beta)
    worst = 0.0
    for z in K.samples:
        if z == 0:
            continue
        zw = z * weights
        norms = np.zeros(len(c))
        for start in range(0, zw.size, _CHUNK):
            block = zw[start : start + _CHUNK]
            norms += np.sum(np.abs(block)[None, :] / np.abs(c.nodes[:, None] - block[None, :]), axis=1)
        worst = max(worst, float(np.max(norms)))
    boltzmann_sum = float(np.sum(weights))
    bound = K.sup_abs * M * boltzmann_sum
    gibbs = spec.volume * (2.0 * math.pi * K.beta) ** (-0.5 * spec.grid.dim)
    factor = boltzmann_sum / gibbs
    passed = worst <= bound * (1.0 + 1e-12) and factor <= 1.05
    return TraceNormCheck(
        max_trace_norm=worst,
        bound=bound,
        resolvent_sup=M,
        boltzmann_sum=boltzmann_sum,
        gibbs_bound=gibbs,
        discretization_factor=factor,
        passed=passed,
    )


def cauchy_riemann_residual(spec: Spectrum, p: ThermoParams, step: float = 1e-3) -> CauchyRiemann:
    """코시-리만 잔차(|d_x P + i d_y P| / max(1, |d_x P|) from Richardson z-derivatives)."""

    levels = get_settings().fd_richardson_levels
    along_real = richardson_derivative(lambda t: pressure_eigsum(spec, p.with_z(p.z + t)), 0.0, 1, step, levels)
    along_imag = richardson_derivative(lambda t: pressure_eigsum(spec, p.with_z(p.z + 1j * t)), 0.0, 1, step, levels)
    # analytic: d/dt P(z + i t) = i P'(z)
    residual = abs(along_real.value + 1j * along_imag.value) / max(1.0, abs(along_real.value))
    return CauchyRiemann(derivative=along_real.value, residual=float(residual))

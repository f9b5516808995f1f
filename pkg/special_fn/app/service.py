"""특수함수 서비스 로직(Bose/Fermi special-function service logic).

    f_sigma^eps(zeta) = zeta / Gamma(sigma) * int_0^inf t^(sigma-1) e^-t / (1 - eps zeta e^-t) dt
                      = sum_{n>=1} eps^(n-1) zeta^n / n^sigma          (|zeta| < 1)

Lower orders are reached with the ladder D f_sigma = f_(sigma-1), D = zeta d/dzeta,
applied under the integral sign: D^m [zeta / (1 - x)] = zeta A_m(x) / (1 - x)^(m+1)
with x = eps zeta e^-t and A_m the Eulerian polynomial.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Any, Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from common_lib.config import get_settings
from common_lib.errors import DomainError, InvalidInputError, NumericalError
from common_lib.logger import get_logger
from common_lib.numerics import composite_gauss

from .models import PolyValue, Statistics

logger = get_logger(__name__)

# Below this modulus the power series is used for vectorised evaluation.
SERIES_RADIUS = 0.5
TAIL_TOLERANCE = 1e-17

# Geometric grading toward t = 0 resolves the non-analytic factor t^(sigma-1).
_T_BREAKS = tuple(10.0 ** -k for k in range(30, 6, -1)) + (
    1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)


def _require_order(sigma: float) -> float:
    sigma = float(sigma)
    if not sigma > 0.0:
        raise DomainError("sigma", "order must be positive", {"sigma": sigma})
    return sigma


def _check_cut(zeta: complex, eps: Statistics, margin: float | None = None) -> None:
    """분지 절단 근접성 검사(Reject arguments on or near the cut)."""

    margin = get_settings().cut_margin if margin is None else margin
    distance = eps.cut_distance(zeta)
    if distance < margin:
        raise DomainError(
            "zeta",
            f"distance {distance:.3e} to the {eps.label} cut is below the margin {margin:.1e}",
            {"zeta": [zeta.real, zeta.imag], "distance": distance, "margin": margin},
        )


def gamma_value(sigma: float) -> float:
    """감마 함수(Gamma function) for sigma > 0.

    Integer and half-integer orders use the closed forms
    Gamma(k) = (k-1)! and Gamma(k + 1/2) = (2k)! sqrt(pi) / (4^k k!).
    """

    sigma = _require_order(sigma)
    twice = 2.0 * sigma
    if twice == round(twice) and sigma <= 85.0:
        if sigma == round(sigma):
            return float(math.factorial(int(sigma) - 1))
        k = int(sigma - 0.5)
        return math.factorial(2 * k) * math.sqrt(math.pi) / (4.0**k * math.factorial(k))
    return float(special.gamma(sigma))


@lru_cache(maxsize=32)
def eulerian_coefficients(m: int) -> tuple[int, ...]:
    """오일러 수 A(m, k), k = 0..m-1 (A_0 = 1)."""

    if m < 0:
        raise ValueError("Eulerian index must be nonnegative")
    row = [1]
    for n in range(2, m + 1):
        row = [
            (k + 1) * (row[k] if k < len(row) else 0) + (n - k) * (row[k - 1] if k >= 1 else 0)
            for k in range(n)
        ]
    return tuple(row)


@lru_cache(maxsize=32)
def stirling_first(k: int) -> tuple[int, ...]:
    """부호 있는 제1종 스털링 수 s(k, j), j = 0..k."""

    row = [1]
    for n in range(k):
        row = [
            (row[j - 1] if j >= 1 else 0) - n * (row[j] if j < len(row) else 0)
            for j in range(n + 2)
        ]
    return tuple(row)


def eulerian_polynomial(m: int, x: ArrayLike) -> NDArray[Any]:
    return np.polynomial.polynomial.polyval(x, np.asarray(eulerian_coefficients(m), dtype=float))


def series_majorant(p: int, x: ArrayLike) -> NDArray[np.float64]:
    """sum_{n>=1} n^p x^n = x A_p(x) / (1 - x)^(p+1) for 0 <= x < 1."""

    xs = np.asarray(x, dtype=float)
    if p < 0 or np.any(xs < 0.0) or np.any(xs >= 1.0):
        raise DomainError("x", "majorant needs integer p >= 0 and 0 <= x < 1", {"p": p})
    return xs * eulerian_polynomial(p, xs) / (1.0 - xs) ** (p + 1)


def f_series(sigma: float, zeta: complex, eps: Statistics | str | int, max_terms: int | None = None) -> PolyValue:
    """거듭제곱 급수(Power series) sum eps^(n-1) zeta^n / n^sigma.

    Stops once |term| < series_rel_tol * |partial| or at the term cap, and
    reports the truncation index.
    """

    eps = Statistics.parse(eps)
    sigma = _require_order(sigma)
    zeta = complex(zeta)
    if abs(zeta) >= 1.0:
        raise DomainError("zeta", "series requires |zeta| < 1", {"zeta": [zeta.real, zeta.imag]})
    if zeta == 0:
        return PolyValue(0j, 0)

    settings = get_settings()
    cap = max_terms or settings.series_max_terms
    partial = 0j
    power = 1.0 + 0j
    sign = 1.0
    for n in range(1, cap + 1):
        power *= zeta
        term = sign * power / n**sigma
        partial += term
        if abs(term) < settings.series_rel_tol * abs(partial):
            return PolyValue(partial, n)
        sign *= eps.epsilon
    logger.warning(
        "급수 항 상한 도달(Series term cap reached): sigma=%s zeta=%s terms=%d", sigma, zeta, cap
    )
    return PolyValue(partial, cap)


def _series_terms_needed(rho: float, order: float, cap: int) -> int:
    # |term_n| / |term_1| = rho^(n-1) n^-order
    if rho == 0.0:
        return 1
    log_tol = math.log(TAIL_TOLERANCE)
    log_rho = math.log(rho)
    for n in range(2, cap + 1):
        if (n - 1) * log_rho - order * math.log(n) < log_tol:
            return n + 1
    return cap


def _series_array(order: float, zetas: NDArray[np.complex128], eps: Statistics) -> NDArray[np.complex128]:
    """Vectorised series for any real order on |zeta| <= SERIES_RADIUS."""

    if zetas.size == 0:
        return np.zeros(zetas.shape, dtype=complex)
    rho = float(np.max(np.abs(zetas)))
    n_terms = _series_terms_needed(rho, order, get_settings().series_max_terms)
    n = np.arange(1, n_terms + 1, dtype=float)
    coeff = float(eps.epsilon) ** (n - 1) / n**order
    return (zetas[..., None] ** n) @ coeff


def _tail_cutoff(top: float) -> float:
    cutoff = 40.0 + 2.0 * top
    while special.gammaincc(top, cutoff) > TAIL_TOLERANCE:
        cutoff += 5.0
    return cutoff


def _u_breakpoints(top: float, zeta: complex) -> NDArray[np.float64]:
    """Panel edges in u = sqrt(t), graded near t = 0 and near t* = ln|zeta|."""

    cutoff = _tail_cutoff(top)
    t_edges = {0.0, cutoff, *(t for t in _T_BREAKS if t < cutoff)}
    if abs(zeta) > 1.0:
        t_star = math.log(abs(zeta))
        t_edges.add(t_star)
        for k in range(1, 6):
            for side in (-1.0, 1.0):
                candidate = t_star * (1.0 + side * 10.0 ** (-k))
                if 0.0 < candidate < cutoff:
                    t_edges.add(candidate)
    return np.sqrt(np.array(sorted(t_edges)))


def _bisect_panels(edges: NDArray[np.float64]) -> NDArray[np.float64]:
    mids = 0.5 * (edges[:-1] + edges[1:])
    out = np.empty(edges.size + mids.size)
    out[0::2] = edges
    out[1::2] = mids
    return out


def _adaptive_quadrature(
    integrand: Callable[[NDArray[np.float64]], NDArray[np.complex128]],
    edges: NDArray[np.float64],
    operation: str,
) -> complex:
    """Composite Gauss-Legendre with panel bisection until two levels agree."""

    settings = get_settings()
    previous: complex | None = None
    difference = float("nan")
    for level in range(settings.quadrature_max_refinements + 1):
        nodes, weights = composite_gauss(edges, settings.quadrature_panel_order)
        samples = weights * integrand(nodes)
        value = complex(np.sum(samples))
        scale = float(np.sum(np.abs(samples)))
        if not np.isfinite(value):
            break
        if previous is not None:
            difference = abs(value - previous)
            if difference <= settings.quadrature_rel_tol * max(scale, abs(value)):
                logger.debug("%s converged at refinement %d (diff=%.2e)", operation, level, difference)
                return value
        previous = value
        edges = _bisect_panels(edges)
    raise NumericalError(
        operation,
        "composite quadrature did not converge",
        {"estimate": [previous.real, previous.imag] if previous is not None else None,
         "difference": difference, "panels": int(edges.size - 1)},
    )


def _lifted_integral(order: float, zeta: complex, eps: Statistics) -> complex:
    """f_order(zeta) via the integral at top order order + m >= 1/2."""

    steps = max(0, math.ceil(0.5 - order))
    top = order + steps
    e = float(eps.epsilon)
    prefactor = zeta / gamma_value(top)

    def integrand(u: NDArray[np.float64]) -> NDArray[np.complex128]:
        t = u * u
        decay = np.exp(-t)
        x = e * zeta * decay
        ratio = eulerian_polynomial(steps, x) / (1.0 - x) ** (steps + 1)
        return 2.0 * u ** (2.0 * top - 1.0) * decay * ratio

    return prefactor * _adaptive_quadrature(integrand, _u_breakpoints(top, zeta), "f_integral")


def f_integral(sigma: float, zeta: complex, eps: Statistics | str | int) -> complex:
    """적분 표현(Integral representation) of f_sigma^eps on the cut plane."""

    eps = Statistics.parse(eps)
    sigma = _require_order(sigma)
    zeta = complex(zeta)
    if zeta == 0:
        return 0j
    _check_cut(zeta, eps)
    return _lifted_integral(sigma, zeta, eps)


def ladder_value(sigma: float, zeta: complex, eps: Statistics | str | int, steps: int) -> complex:
    """f_(sigma - steps)(zeta), reached from the positive order sigma."""

    eps = Statistics.parse(eps)
    sigma = _require_order(sigma)
    if steps < 0:
        raise InvalidInputError("steps", "ladder steps must be nonnegative")
    zeta = complex(zeta)
    order = sigma - steps
    if zeta == 0:
        return 0j
    if abs(zeta) <= SERIES_RADIUS:
        return complex(_series_array(order, np.array([zeta]), eps)[0])
    _check_cut(zeta, eps)
    return _lifted_integral(order, zeta, eps)


def polylog(order: float, zetas: ArrayLike, eps: Statistics | str | int) -> NDArray[np.complex128]:
    """벡터화 평가(Vectorised f_order^eps) for any real order.

    Series on |zeta| <= 1/2, ladder integral elsewhere. The output keeps the
    input shape.
    """

    eps = Statistics.parse(eps)
    z = np.asarray(zetas, dtype=complex)
    out = np.zeros(z.shape, dtype=complex)
    small = np.abs(z) <= SERIES_RADIUS
    out[small] = _series_array(float(order), z[small], eps)
    flat_z = z.reshape(-1)
    flat_out = out.reshape(-1)
    for idx in np.flatnonzero(~small.reshape(-1)):
        zeta = complex(flat_z[idx])
        _check_cut(zeta, eps)
        flat_out[idx] = _lifted_integral(float(order), zeta, eps)
    return flat_out.reshape(z.shape)


def _series_derivative(sigma: float, zeta: complex, eps: Statistics, order: int) -> complex:
    settings = get_settings()
    total = 0j
    for n in range(order, order + settings.series_max_terms):
        sign = 1.0 if eps is Statistics.BOSE or n % 2 == 1 else -1.0
        term = sign * math.perm(n, order) / n**sigma * zeta ** (n - order)
        total += term
        if n > order and abs(term) < settings.series_rel_tol * abs(total):
            break
    return total


def f_derivative(sigma: float, zeta: complex, eps: Statistics | str | int, order: int) -> complex:
    """도함수(Derivative) d^order/dzeta^order f_sigma^eps.

    Near the origin the series is differentiated term by term. Elsewhere
    zeta^k d^k/dzeta^k = sum_j s(k, j) D^j with D^j f_sigma = f_(sigma-j).
    """

    eps = Statistics.parse(eps)
    sigma = _require_order(sigma)
    cap = get_settings().max_derivative_order
    if order < 0 or order > cap:
        raise InvalidInputError("order", f"derivative order must lie in [0, {cap}]", {"order": order})
    zeta = complex(zeta)
    if order == 0:
        return f_integral(sigma, zeta, eps)
    if abs(zeta) < SERIES_RADIUS:
        return _series_derivative(sigma, zeta, eps, order)
    _check_cut(zeta, eps)
    coefficients = stirling_first(order)
    total = sum(coefficients[j] * ladder_value(sigma, zeta, eps, j) for j in range(1, order + 1))
    return total / zeta**order

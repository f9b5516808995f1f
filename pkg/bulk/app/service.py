"""열역학 극한 서비스(Thermodynamic-limit service).

Landau-level representation of the bulk pressure (units hbar = m = 1, charge in omega):

    P(omega) = omega A sum_k f_{3/2}(z e^{-c_k omega}),   A = (2 pi beta)^(-3/2),  c_k = (k + 1/2) beta

omega-derivatives are taken term by term. With D f_s = f_(s-1),
d/domega f_s(z e^{-c omega}) = -c f_(s-1)(z e^{-c omega}), hence

    d^N P / domega^N = A sum_k [ omega (-c_k)^N f_{3/2-N}(u_k) + N (-c_k)^(N-1) f_{5/2-N}(u_k) ].

The discarded tail of either sum is bounded with |f_s(u)| <= sum_n n^p |u|^n
(p = ceil(max(0, -s))) and a geometric ratio between consecutive levels.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from common_lib.config import get_settings
from common_lib.errors import DomainError, InvalidInputError, NumericalError
from common_lib.logger import get_logger
from common_lib.numerics import richardson_derivative, stencil_points
from special_fn.app.models import Statistics
from special_fn.app.service import polylog, series_majorant

from .models import LevelSum, SusceptibilityResult, ThermoParams

logger = get_logger(__name__)

DEFAULT_TOL = 1e-15
MIN_STEP = 1e-8


def thermal_prefactor(beta: float) -> float:
    """(2 pi beta)^(-3/2)."""
    return (2.0 * math.pi * beta) ** -1.5


def _level_rates(beta: float, levels: int) -> NDArray[np.float64]:
    return (np.arange(levels, dtype=float) + 0.5) * beta


def _check_params(p: ThermoParams) -> None:
    if p.omega <= 0.0:
        raise DomainError("omega", "bulk formulas need omega > 0", {"omega": p.omega})
    margin = get_settings().cut_margin
    distance = p.cut_distance()
    if distance < margin:
        raise DomainError(
            "z",
            f"fugacity within {distance:.3e} of the cut starting at {p.cut_start:.6g}",
            {"z": [p.z.real, p.z.imag], "distance": distance, "margin": margin},
        )


def landau_tail_bound(p: ThermoParams, k0: int, order: int = 0) -> float:
    """준위 꼬리 상한(Rigorous bound on sum_{k >= k0} of the order-N differentiated terms)."""

    if k0 < 0:
        raise InvalidInputError("k0", "level index must be nonnegative")
    if p.z == 0:
        return 0.0
    c0 = (k0 + 0.5) * p.beta
    x0 = abs(p.z) * math.exp(-c0 * p.omega)
    if x0 >= 1.0:
        raise DomainError("z", "|z| e^{-(k0+1/2) beta omega} must be < 1", {"k0": k0, "x0": x0})
    power = math.ceil(max(0.0, order - 1.5))
    growth = float(series_majorant(power, x0)) / x0
    ratio = ((k0 + 1.5) / (k0 + 0.5)) ** order * math.exp(-p.beta * p.omega)
    if ratio >= 1.0:
        return math.inf
    polynomial = p.omega * c0**order + (order * c0 ** (order - 1) if order > 0 else 0.0)
    first = thermal_prefactor(p.beta) * polynomial * growth * x0
    return first / (1.0 - ratio)


def _levels_for(p: ThermoParams, tol: float, order: int, levels: Optional[int]) -> int:
    """Smallest level count whose tail bound is below tol (doubling, then bisection)."""

    if levels is not None:
        return int(levels)
    cap = get_settings().landau_level_cap
    # levels with |u_k| >= 1 cannot be bounded; start past them
    start = max(1, math.ceil(math.log(abs(p.z)) / (p.beta * p.omega) + 0.5)) if abs(p.z) > 1 else 1
    hi = start
    while landau_tail_bound(p, hi, order) >= tol:
        if hi >= cap:
            raise NumericalError(
                "pressure_bulk",
                "tolerance unreachable within the Landau level cap",
                {"cap": cap, "tol": tol, "bound_at_cap": landau_tail_bound(p, cap, order)},
            )
        hi = min(2 * hi, cap)
    lo = max(start, hi // 2)
    while lo < hi:
        mid = (lo + hi) // 2
        if landau_tail_bound(p, mid, order) < tol:
            hi = mid
        else:
            lo = mid + 1
    return hi


def pressure_bulk(p: ThermoParams, tol: float = DEFAULT_TOL, levels: Optional[int] = None) -> LevelSum:
    """열역학 극한 압력(Bulk pressure) as a truncated Landau-level sum.

    Args:
        p: Thermodynamic parameters (omega > 0)
        tol: Absolute tolerance for the discarded tail
        levels: Forced number of levels (cap studies); the bound is still reported
    """

    _check_params(p)
    if p.z == 0:
        return LevelSum(0j, 0, 0.0)
    count = _levels_for(p, tol, 0, levels)
    u = p.z * np.exp(-_level_rates(p.beta, count) * p.omega)
    total = np.sum(polylog(1.5, u, p.eps))
    value = complex(p.omega * thermal_prefactor(p.beta) * total)
    bound = landau_tail_bound(p, count, 0)
    logger.debug("Bulk pressure: %d levels, tail bound %.2e", count, bound)
    return LevelSum(value, count, bound)


def free_gas_pressure(beta: float, z: complex, eps: Statistics | str | int) -> complex:
    """자유 기체 압력(Free-gas pressure) (2 pi beta)^(-3/2) beta^-1 f_{5/2}(z)."""

    if beta <= 0:
        raise DomainError("beta", "inverse temperature must be positive", {"beta": beta})
    return complex(thermal_prefactor(beta) / beta * polylog(2.5, complex(z), eps))


def _analytic_derivative(p: ThermoParams, order: int, tol: float) -> SusceptibilityResult:
    count = _levels_for(p, tol, order, None)
    rates = _level_rates(p.beta, count)
    u = p.z * np.exp(-rates * p.omega)
    main = p.omega * (-rates) ** order * polylog(1.5 - order, u, p.eps)
    if order > 0:
        main = main + order * (-rates) ** (order - 1) * polylog(2.5 - order, u, p.eps)
    value = complex(thermal_prefactor(p.beta) * np.sum(main))
    return SusceptibilityResult(
        value=value,
        order=order,
        method="analytic",
        error_estimate=landau_tail_bound(p, count, order),
        levels=count,
    )


def default_step(omega: float) -> float:
    return max(1e-3, 1e-2 * omega)


def _finite_diff_derivative(p: ThermoParams, order: int, tol: float, step: Optional[float]) -> SusceptibilityResult:
    settings = get_settings()
    h = default_step(p.omega) if step is None else step
    reach = stencil_points(order) // 2
    if p.omega - reach * h <= 0.0:
        h = 0.5 * p.omega / reach
    if h < MIN_STEP:
        raise NumericalError("susceptibility_bulk", "finite-difference step underflow", {"step": h, "omega": p.omega})

    # one level count for every shifted omega keeps the sum smooth in omega
    count = _levels_for(p.with_omega(p.omega - reach * h), tol, 0, None)

    def pressure_at(omega: float) -> complex:
        return pressure_bulk(p.with_omega(omega), levels=count).value

    fd = richardson_derivative(pressure_at, p.omega, order, h, settings.fd_richardson_levels)
    return SusceptibilityResult(value=fd.value, order=order, method="finite_diff", error_estimate=fd.error, step=h)


def susceptibility_bulk(
    p: ThermoParams,
    N: int,
    method: str = "analytic",
    tol: float = DEFAULT_TOL,
    step: Optional[float] = None,
) -> SusceptibilityResult:
    """일반화 감수율(Generalized susceptibility) d^N P / domega^N at fixed (beta, z).

    Args:
        p: Thermodynamic parameters
        N: Derivative order (0 returns the pressure)
        method: "analytic" (term-wise ladder) or "finite_diff" (stencil + Richardson)
        tol: Tail tolerance of every level sum
        step: Finite-difference base step (default max(1e-3, 1e-2 omega))
    """

    cap = get_settings().susceptibility_max_order
    if N < 0 or N > cap:
        raise InvalidInputError("N", f"order must lie in [0, {cap}]", {"N": N})
    if method not in {"analytic", "finite_diff"}:
        raise InvalidInputError("method", "expected 'analytic' or 'finite_diff'", {"method": method})
    _check_params(p)
    if N == 0:
        pressure = pressure_bulk(p, tol)
        return SusceptibilityResult(
            value=pressure.value, order=0, method=method, error_estimate=pressure.tail_bound, levels=pressure.levels
        )
    if p.z == 0:
        return SusceptibilityResult(value=0j, order=N, method=method, error_estimate=0.0, levels=0)
    if method == "analytic":
        return _analytic_derivative(p, N, tol)
    return _finite_diff_derivative(p, N, tol, step)


def magnetization_bulk(p: ThermoParams) -> SusceptibilityResult:
    """자화(Magnetization) = first omega-derivative of the bulk pressure."""

    return susceptibility_bulk(p, 1, "analytic")


def pressure_z_derivative(p: ThermoParams, tol: float = DEFAULT_TOL) -> complex:
    """d P / dz at fixed omega, via z f'_{3/2}(u) = f_{1/2}(u) e^{...}."""

    _check_params(p)
    prefactor = p.omega * thermal_prefactor(p.beta)
    if p.z == 0:
        # f'_{3/2}(0) = 1, leaving a geometric sum
        return complex(prefactor * math.exp(-0.5 * p.beta * p.omega) / -math.expm1(-p.beta * p.omega))
    count = _levels_for(p, tol * min(1.0, abs(p.z)), 0, None)
    u = p.z * np.exp(-_level_rates(p.beta, count) * p.omega)
    return complex(prefactor * np.sum(polylog(0.5, u, p.eps)) / p.z)

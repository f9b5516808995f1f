"""섭동 전개(Semigroup and resolvent expansions in the field offset dw = omega - omega0).

Regularized factors Phi o t with Phi = exp(i dw phi) are carried as truncated
power series in dw (``PhaseSeries``); the trace of a product of such factors
then yields the flux moments d_{m,n}/m! directly as its coefficients, and the
dw-independent trace coefficients a_j are read off after collecting every
contribution up to order N.
"""
from __future__ import annotations

import math
from functools import reduce
from typing import Callable, Iterator, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import linalg

from common_lib.cache import EigenCache
from common_lib.config import get_settings
from common_lib.errors import DomainError, InvalidInputError, NumericalError
from common_lib.logger import get_logger
from common_lib.numerics import (
    FiniteDifference,
    composite_gauss,
    divided_differences,
    fit_loglog,
    graded_unit_panels,
    richardson_derivative,
)
from spectrum.app.models import BoxGrid, EigenSystem
from spectrum.app.service import build_magnetic_hamiltonian_2d, diagonalize, eigen_system

from .corrections import flux_correction, lattice_correction
from .kernels import PlaneGeometry, g_kernel, heat_kernel_grid, plane_geometry, require_plane, semigroup_operator
from .models import ExpansionReport, GridKernel, SmallnessBound, VolumeScaling, slope_supported

logger = get_logger(__name__)

MAX_SIMPLEX_DEPTH = 3
MAX_EXPANSION_ORDER = 2
# graded panel levels per integration variable, by simplex depth
_PANEL_LEVELS = {1: 3, 2: 2, 3: 1}


def compositions(n: int, parts: Optional[int] = None) -> Iterator[tuple[int, ...]]:
    """Ordered tuples of positive integers summing to n (with exactly ``parts`` entries if given)."""
    if parts is None:
        for k in range(1, n + 1):
            yield from compositions(n, k)
        return
    if parts == 1:
        if n >= 1:
            yield (n,)
        return
    for first in range(1, n - parts + 2):
        for rest in compositions(n - first, parts - 1):
            yield (first, *rest)


def weak_compositions(n: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in weak_compositions(n - first, parts - 1):
            yield (first, *rest)


class PhaseSeries:
    """dw 절단 급수(Truncated series sum_{m <= order} dw^m X_m of operator matrices).

    ``None`` stands for a zero coefficient.
    """

    __slots__ = ("terms", "order", "size")

    def __init__(self, terms: Sequence[Optional[NDArray[np.complex128]]], order: int, size: int) -> None:
        self.order = order
        self.size = size
        self.terms = [terms[m] if m < len(terms) else None for m in range(order + 1)]

    @classmethod
    def regularized(cls, matrix: NDArray[np.generic], phase: NDArray[np.float64], order: int) -> "PhaseSeries":
        """Series of exp(i dw phase) o matrix."""
        terms = [(1j**m / math.factorial(m)) * phase**m * matrix for m in range(order + 1)]
        return cls(terms, order, matrix.shape[0])

    @classmethod
    def constant(cls, matrix: NDArray[np.generic], order: int) -> "PhaseSeries":
        return cls([np.asarray(matrix, dtype=complex)], order, matrix.shape[0])

    def truncated(self, order: int) -> "PhaseSeries":
        return PhaseSeries(self.terms, min(order, self.order), self.size)

    def shifted(self, k: int) -> "PhaseSeries":
        """Multiply by dw^k."""
        return PhaseSeries([None] * k + self.terms, self.order + k, self.size)

    def __add__(self, other: "PhaseSeries") -> "PhaseSeries":
        order = min(self.order, other.order)
        terms = []
        for a, b in zip(self.terms[: order + 1], other.terms[: order + 1]):
            terms.append(b if a is None else a if b is None else a + b)
        return PhaseSeries(terms, order, self.size)

    def __mul__(self, scalar: complex) -> "PhaseSeries":
        return PhaseSeries([None if t is None else scalar * t for t in self.terms], self.order, self.size)

    __rmul__ = __mul__

    def __neg__(self) -> "PhaseSeries":
        return self * -1.0

    def __sub__(self, other: "PhaseSeries") -> "PhaseSeries":
        return self + (-other)

    def __matmul__(self, other: "PhaseSeries") -> "PhaseSeries":
        order = min(self.order, other.order)
        terms: list[Optional[NDArray[np.complex128]]] = [None] * (order + 1)
        for i, a in enumerate(self.terms[: order + 1]):
            if a is None:
                continue
            for j, b in enumerate(other.terms[: order + 1 - i]):
                if b is None:
                    continue
                product = a @ b
                terms[i + j] = product if terms[i + j] is None else terms[i + j] + product
        return PhaseSeries(terms, order, self.size)

    def trace(self) -> NDArray[np.complex128]:
        return np.array([0j if t is None else complex(np.trace(t)) for t in self.terms])

    def evaluate(self, delta_omega: float) -> NDArray[np.complex128]:
        out = np.zeros((self.size, self.size), dtype=complex)
        for m, t in enumerate(self.terms):
            if t is not None:
                out += delta_omega**m * t
        return out


def chain(factors: Sequence[PhaseSeries], order: int) -> PhaseSeries:
    return reduce(lambda a, b: a @ b, [f.truncated(order) for f in factors])


def _time_rule(t: float, quad_order: int, levels: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    return composite_gauss([t * b for b in graded_unit_panels(levels)], quad_order)


class SimplexIntegrator:
    """단체 적분기(Iterated Gauss rule on D_k(beta) = {0 < tau_k < ... < tau_1 < beta}).

    I_k(i_1..i_k) = int_0^beta W~(beta - tau) J(tau; i_1..i_k) with
    J(t; i) = R~_i(t) and J(t; i, rest) = int_0^t R~_i(t - s) J(s; rest) ds,
    which is the Duffy map of the simplex onto nested panels. Semigroup
    factors at every node reuse the single eigendecomposition at omega0.
    """

    def __init__(
        self,
        system: EigenSystem,
        geometry: PlaneGeometry,
        wrap: Callable[[NDArray[np.complex128]], object],
        quad_order: int,
    ) -> None:
        self.system = system
        self.geometry = geometry
        self.wrap = wrap
        self.quad_order = quad_order

    def nodes(self, depth: int) -> int:
        per_variable = (2 * _PANEL_LEVELS[depth] + 1) * self.quad_order
        return per_variable**depth

    def _correction(self, index: int, t: float):
        return self.wrap(lattice_correction(self.geometry, semigroup_operator(self.system, t), index))

    def _tail(self, indices: tuple[int, ...], t: float, levels: int):
        if len(indices) == 1:
            return self._correction(indices[0], t)
        total = None
        for s, w in zip(*_time_rule(t, self.quad_order, levels)):
            term = (self._correction(indices[0], t - s) @ self._tail(indices[1:], s, levels)) * w
            total = term if total is None else total + term
        return total

    def integral(self, indices: tuple[int, ...], beta: float):
        depth = len(indices)
        levels = _PANEL_LEVELS[depth]
        total = None
        for tau, w in zip(*_time_rule(beta, self.quad_order, levels)):
            head = self.wrap(semigroup_operator(self.system, beta - tau))
            term = (head @ self._tail(indices, tau, levels)) * w
            total = term if total is None else total + term
        return total


def _check_indices(factor_indices: Sequence[int]) -> tuple[int, ...]:
    indices = tuple(int(i) for i in factor_indices)
    if not indices:
        raise InvalidInputError("factor_indices", "at least one correction factor is needed")
    if len(indices) > MAX_SIMPLEX_DEPTH:
        raise InvalidInputError("factor_indices", f"simplex depth is capped at {MAX_SIMPLEX_DEPTH}", {"k": len(indices)})
    if any(i < 1 for i in indices):
        raise InvalidInputError("factor_indices", "indices start at 1", {"indices": list(indices)})
    return indices


def _integrator(grid, omega0, wrap_factory, quad_order, cache) -> SimplexIntegrator:
    system = eigen_system(grid, omega0, cache=cache)
    geometry = plane_geometry(grid, omega0)
    return SimplexIntegrator(system, geometry, wrap_factory(geometry), quad_order)


def _check_budget(integrator: SimplexIntegrator, depth: int) -> None:
    budget = get_settings().simplex_node_budget
    nodes = integrator.nodes(depth)
    if nodes > budget:
        raise NumericalError("simplex_integral", "quadrature budget exceeded", {"nodes": nodes, "budget": budget})


def simplex_integral(
    grid: BoxGrid,
    beta: float,
    omega: float,
    factor_indices: Sequence[int],
    quad_order: Optional[int] = None,
    omega0: Optional[float] = None,
    cache: Optional[EigenCache] = None,
) -> GridKernel:
    """단체 보흐너 적분(I_k(i_1..i_k)(beta, omega) with factors regularized at dw = omega - omega0).

    Args:
        omega0: Reference field; defaults to ``omega`` (dw = 0)
        quad_order: Gauss-Legendre nodes per graded panel
    """
    require_plane(grid)
    indices = _check_indices(factor_indices)
    reference = omega if omega0 is None else omega0
    delta = omega - reference
    order = quad_order or get_settings().simplex_quad_order

    def exact_phases(geometry: PlaneGeometry):
        Phi = geometry.phase_factor(delta)
        return lambda matrix: Phi * matrix

    integrator = _integrator(grid, reference, exact_phases, order, cache)
    _check_budget(integrator, len(indices))
    value = integrator.integral(indices, beta)
    return GridKernel.from_operator(value, grid, f"I{len(indices)}{indices}")


def semigroup_coefficients(
    grid: BoxGrid,
    beta: float,
    omega0: float,
    N: int,
    quad_order: Optional[int] = None,
    cache: Optional[EigenCache] = None,
) -> list[PhaseSeries]:
    """W_{L,n} = sum_k (-1)^k sum_{i_1+..+i_k = n} I_k(i), n = 1..N, each to order N - n in dw."""
    require_plane(grid)
    order = quad_order or get_settings().simplex_quad_order
    out = []
    for n in range(1, N + 1):

        def series_phases(geometry: PlaneGeometry, keep: int = N - n):
            return lambda matrix: PhaseSeries.regularized(matrix, geometry.phase, keep)

        integrator = _integrator(grid, omega0, series_phases, order, cache)
        total: Optional[PhaseSeries] = None
        for indices in compositions(n):
            _check_budget(integrator, len(indices))
            term = integrator.integral(indices, beta) * (-1.0) ** len(indices)
            total = term if total is None else total + term
        out.append(total)
    return out


def _check_order(N: int) -> None:
    if not 1 <= N <= MAX_EXPANSION_ORDER:
        raise InvalidInputError("N", f"expansion order must be 1..{MAX_EXPANSION_ORDER}", {"N": N})


def _fit_remainders(samples: list[tuple[float, float]], require_slope: bool, operation: str):
    delta = [dw for dw, _ in samples]
    positive = [(abs(dw), r) for dw, r in samples if dw != 0.0 and r > 0.0]
    if not slope_supported(delta) or len(positive) < 2:
        if require_slope:
            raise NumericalError(operation, "slope fit underdetermined", {"samples": len(positive)})
        return None
    return fit_loglog([dw for dw, _ in positive], [r for _, r in positive])


def _apply_fit(report_fields: dict, fit) -> dict:
    if fit is not None:
        report_fields.update(
            slope=fit.slope,
            slope_ci=(fit.ci_low, fit.ci_high),
            r_squared=fit.r_squared,
            stderr=fit.stderr,
        )
    return report_fields


def semigroup_expansion(
    grid: BoxGrid,
    beta: float,
    omega0: float,
    N: int,
    dw_samples: Sequence[float],
    quad_order: Optional[int] = None,
    require_slope: bool = False,
    cache: Optional[EigenCache] = None,
) -> ExpansionReport:
    """반군 전개(W(omega) = W~ + sum dw^n W_{L,n} + remainder; remainder norms and slope).

    The remainder is W(omega) - W~(omega) - sum dw^n W_{L,n}(omega) by direct
    subtraction from the exact semigroup at omega0 + dw.
    """
    _check_order(N)
    if not dw_samples:
        raise InvalidInputError("dw_samples", "at least one field offset is needed")
    geometry = plane_geometry(grid, omega0)
    W0 = semigroup_operator(eigen_system(grid, omega0, cache=cache), beta)
    coefficients = semigroup_coefficients(grid, beta, omega0, N, quad_order, cache)
    samples = []
    for dw in dw_samples:
        W = semigroup_operator(eigen_system(grid, omega0 + dw, cache=cache), beta)
        remainder = W - geometry.phase_factor(dw) * W0
        for n, series in enumerate(coefficients, start=1):
            remainder -= dw**n * series.evaluate(dw)
        samples.append((float(dw), float(linalg.norm(remainder, 2))))
    fit = _fit_remainders(samples, require_slope, "semigroup_expansion")
    fields = dict(
        kind="semigroup",
        order=N,
        beta=beta,
        omega0=omega0,
        grid=grid.label(),
        a_0=complex(np.trace(W0)),
        coefficients=[complex(series.trace()[0]) for series in coefficients],
        remainder_samples=samples,
    )
    report = ExpansionReport(**_apply_fit(fields, fit))
    logger.info("반군 전개(Semigroup expansion) N=%d: slope=%s", N, report.slope)
    return report


def trace_moments(factors: Sequence[GridKernel], m_max: int) -> list[complex]:
    """Tr prod_i (Phi o t_i) = sum_m dw^m c_m; returns c_0..c_{m_max} with c_m = d_{m,n}/m!."""
    if not factors:
        raise InvalidInputError("factors", "at least one kernel is needed")
    grid = factors[0].grid
    if any(f.grid != grid for f in factors):
        raise InvalidInputError("factors", "kernels live on different grids")
    phase = plane_geometry(grid, 0.0).phase
    series = chain([PhaseSeries.regularized(f.operator, phase, m_max) for f in factors], m_max)
    return [complex(c) for c in series.trace()]


def flux_moment(factors: Sequence[GridKernel], m: int) -> complex:
    """d_{m,n} = int (i fl_n)^m t_0(x, y_1) ... t_n(y_n, x)."""
    return math.factorial(m) * trace_moments(factors, m)[m]


def volume_scaling(lengths: Sequence[float], values: Sequence[complex], dim: int, quantity: str = "") -> VolumeScaling:
    """부피 법칙 적합(Bulk exponent and boundary polynomial of values sampled over L).

    Needs dim + 2 lengths so that at least two windows of dim-th divided
    differences exist and the degree-dim polynomial keeps one spare sample.
    """
    Ls = np.asarray(lengths, dtype=float)
    data = np.asarray(values, dtype=complex)
    if Ls.size < dim + 2:
        raise InvalidInputError("lengths", f"need at least {dim + 2} box sizes", {"lengths": Ls.tolist()})
    order = np.argsort(Ls)
    Ls, data = Ls[order], data[order]
    if np.any(np.diff(Ls) <= 0):
        raise InvalidInputError("lengths", "box sizes must be distinct", {"lengths": Ls.tolist()})
    raw = fit_loglog(Ls, data)
    bulk = divided_differences(Ls, data, dim)
    centres = np.array([Ls[i : i + dim + 1].mean() for i in range(bulk.size)])
    floor = 1e-12 * float(np.max(np.abs(data))) / Ls[-1] ** dim
    exponent: Optional[float] = None
    if np.all(np.abs(bulk) > floor):
        exponent = dim + float(np.polyfit(np.log(centres), np.log(np.abs(bulk)), 1)[0])
    vander = np.vander(Ls, dim + 1).astype(complex)
    coefficients, *_ = np.linalg.lstsq(vander, data, rcond=None)
    norm = float(np.linalg.norm(data))
    residual = float(np.linalg.norm(vander @ coefficients - data)) / norm if norm > 0 else 0.0
    return VolumeScaling(
        quantity=quantity,
        dim=dim,
        lengths=[float(L) for L in Ls],
        values=[complex(v) for v in data],
        raw_slope=raw.slope,
        exponent=exponent,
        kac_coefficients=[complex(c) for c in coefficients],
        fit_residual=residual,
    )


def _fixed_spacing(grids: Sequence[BoxGrid]) -> list[BoxGrid]:
    spacings = [g.h for g in grids]
    if max(spacings) - min(spacings) > 1e-9 * max(spacings):
        raise InvalidInputError("grids", "grid spacing must be the same for every box", {"spacings": spacings})
    return sorted(grids, key=lambda g: g.L)


def flux_moment_scaling(
    grids: Sequence[BoxGrid],
    beta: float,
    omega0: float,
    m: int,
    n_factors: int,
    family: str = "G",
    xi: Optional[complex] = None,
    z: Optional[complex] = None,
    cache: Optional[EigenCache] = None,
) -> VolumeScaling:
    """부피 스케일링(Growth of d_{m,n}(L) over a family of boxes at fixed h).

    ``family`` "G" uses t_0 = ... = t_n = G; "Gg" uses t_0 = G and t_i = g.
    """
    if family not in ("G", "Gg"):
        raise InvalidInputError("family", "expected 'G' or 'Gg'")
    if family == "Gg" and (xi is None or z is None):
        raise InvalidInputError("xi", "family 'Gg' needs xi and z")
    ordered = _fixed_spacing(grids)
    if len({g.L for g in ordered}) < ordered[0].dim + 2:
        raise InvalidInputError("grids", f"need at least {ordered[0].dim + 2} box sizes", {"lengths": [g.L for g in ordered]})
    values = []
    for grid in ordered:
        G = heat_kernel_grid(grid, beta, omega0, cache)
        rest = G if family == "G" else g_kernel(grid, beta, omega0, xi, z, cache)
        values.append(flux_moment([G, *([rest] * n_factors)], m))
    scaling = volume_scaling([g.L for g in ordered], values, ordered[0].dim, f"d_{{{m},{n_factors}}}[{family}]")
    logger.info("부피 스케일링(Volume scaling) %s: exponent=%s raw=%.3f", scaling.quantity, scaling.exponent, scaling.raw_slope)
    return scaling


def _weights(grid: BoxGrid, beta: float, omega: float) -> NDArray[np.float64]:
    H = build_magnetic_hamiltonian_2d(grid, omega)
    return np.exp(-beta * diagonalize(H.matrix, vectors=False))


def trace_g(grid: BoxGrid, beta: float, omega: float, xi: complex, z: complex) -> complex:
    """Tr g(omega) = sum_k z w_k / (xi - z w_k), w_k = e^{-beta E_k}."""
    zw = z * _weights(grid, beta, omega)
    return complex(np.sum(zw / (xi - zw)))


def trace_g_derivative(
    grid: BoxGrid,
    beta: float,
    omega: float,
    xi: complex,
    z: complex,
    N: int,
    step: float = 0.05,
) -> FiniteDifference:
    """d^N/domega^N Tr g by direct recomputation at shifted omega."""
    require_plane(grid)
    levels = get_settings().fd_richardson_levels
    return richardson_derivative(lambda w: trace_g(grid, beta, w, xi, z), omega, N, step, levels)


def trace_g_scaling(
    grids: Sequence[BoxGrid],
    beta: float,
    omega: float,
    xi: complex,
    z: complex,
    N: int = 0,
) -> VolumeScaling:
    """부피 스케일링(Growth of d^N/domega^N Tr g over boxes at fixed h)."""
    ordered = _fixed_spacing(grids)
    if N < 0:
        raise InvalidInputError("N", "derivative order must be non-negative", {"N": N})
    if N == 0:
        values = [trace_g(grid, beta, omega, xi, z) for grid in ordered]
    else:
        values = [trace_g_derivative(grid, beta, omega, xi, z, N).value for grid in ordered]
    scaling = volume_scaling([g.L for g in ordered], values, ordered[0].dim, f"d^{N} Tr g")
    logger.info("부피 스케일링(Volume scaling) %s: exponent=%s raw=%.3f", scaling.quantity, scaling.exponent, scaling.raw_slope)
    return scaling


def smallness_bound(
    grid: BoxGrid,
    beta: float,
    omega0: float,
    xi: complex,
    z: complex,
    delta_omega: float,
    cache: Optional[EigenCache] = None,
) -> SmallnessBound:
    """C1 M |dw| |z| with C1 = ||W - W~|| / |dw| and M = ||(xi - zW)^{-1}|| both measured."""
    geometry = plane_geometry(grid, omega0)
    system = eigen_system(grid, omega0 + delta_omega, cache=cache)
    weights = np.exp(-beta * system.values)
    resolvent = float(1.0 / np.min(np.abs(xi - z * weights)))
    c1 = 0.0
    if delta_omega != 0.0:
        W = semigroup_operator(system, beta)
        W0 = semigroup_operator(eigen_system(grid, omega0, cache=cache), beta)
        c1 = float(linalg.norm(W - geometry.phase_factor(delta_omega) * W0, 2)) / abs(delta_omega)
    value = c1 * resolvent * abs(delta_omega) * abs(z)
    return SmallnessBound(
        c1=c1, resolvent_sup=resolvent, sup_z=abs(z), delta_omega=delta_omega, value=value, satisfied=value < 0.5
    )


def _resolvent_coefficients(
    identity: PhaseSeries,
    g_reg: PhaseSeries,
    r_reg: dict[int, PhaseSeries],
    xi: complex,
    N: int,
) -> dict[int, PhaseSeries]:
    """S_0 = xi^{-1}(1 + g~), S_n = xi^{-1} sum_k (-xi^{-1})^k sum_{|i| = n} (1 + g~) r~_{i_1}..r~_{i_k}."""
    one_plus_g = identity + g_reg
    S = {0: one_plus_g * (1.0 / xi)}
    for n in range(1, N + 1):
        total: Optional[PhaseSeries] = None
        for indices in compositions(n):
            term = chain([one_plus_g, *(r_reg[i] for i in indices)], N - n) * ((-1.0 / xi) ** len(indices) / xi)
            total = term if total is None else total + term
        S[n] = total
    return S


def _inverse_coefficients(
    S: dict[int, PhaseSeries],
    W: dict[int, PhaseSeries],
    z: complex,
    N: int,
) -> dict[int, PhaseSeries]:
    """T_n = sum_k z^k sum S_{i_0} W_{j_1} S_{i_1} .. W_{j_k} S_{i_k}, i >= 0, j >= 1, total n."""
    T = {}
    for n in range(1, N + 1):
        total: Optional[PhaseSeries] = None
        for k in range(1, n + 1):
            for J in range(k, n + 1):
                for js in compositions(J, k):
                    for is_ in weak_compositions(n - J, k + 1):
                        factors = [S[is_[0]]]
                        for j, i in zip(js, is_[1:]):
                            factors += [W[j], S[i]]
                        term = chain(factors, N - n) * z**k
                        total = term if total is None else total + term
        T[n] = total
    return T


def g_expansion_trace(
    grid: BoxGrid,
    beta: float,
    omega0: float,
    xi: complex,
    z: complex,
    N: int,
    dw_samples: Sequence[float],
    quad_order: Optional[int] = None,
    require_slope: bool = False,
    fd_step: float = 0.05,
    cache: Optional[EigenCache] = None,
) -> ExpansionReport:
    """g 트레이스 전개(Tr g(omega) = a_0 + sum_j dw^j a_j + remainder).

    Collects Tr M = Tr g0 - xi^{-1} sum dw^n Tr r_{L,n}, the term
    -xi^{-1} z Tr(A W~ r^) with A = sum dw^k S_{L,k}, and sum dw^n Tr g_{L,n},
    g_{L,n} = sum_m [S_{n-m} z W_m + T_m z W_{n-m}], W_0 = W~. N! a_N is
    checked against a finite difference of Tr g, and remainders against the
    exact trace at omega0 + dw.

    Raises:
        DomainError: C1 M |dw| |z| >= 1/2 for one of the samples
    """
    require_plane(grid)
    _check_order(N)
    if not dw_samples:
        raise InvalidInputError("dw_samples", "at least one field offset is needed")
    worst: Optional[SmallnessBound] = None
    for dw in dw_samples:
        bound = smallness_bound(grid, beta, omega0, xi, z, dw, cache)
        if not bound.satisfied:
            raise DomainError("delta_omega", "perturbation too large for the expansion", bound.model_dump())
        if worst is None or bound.value > worst.value:
            worst = bound

    system = eigen_system(grid, omega0, cache=cache)
    geometry = plane_geometry(grid, omega0)
    W0 = semigroup_operator(system, beta)
    zw = z * np.exp(-beta * system.values)
    g0 = system.function(zw / (xi - zw))
    a = np.zeros(N + 1, dtype=complex)
    a[0] = np.sum(zw / (xi - zw))

    if z != 0:
        P = geometry.phase
        identity = PhaseSeries.constant(np.eye(W0.shape[0], dtype=complex), N)
        W = {0: PhaseSeries.regularized(W0, P, N)}
        for n, series in enumerate(semigroup_coefficients(grid, beta, omega0, N, quad_order, cache), start=1):
            W[n] = series
        g_reg = PhaseSeries.regularized(g0, P, N)
        r_raw = {k: flux_correction(geometry, W0, g0, z, k) for k in range(1, N + 1)}
        r_reg = {k: PhaseSeries.regularized(r_raw[k], P, N - k) for k in r_raw}
        S = _resolvent_coefficients(identity, g_reg, r_reg, xi, N)
        T = _inverse_coefficients(S, W, z, N)

        # Tr M: the diagonal phase drops out of Tr g~ and Tr r^
        for n in range(1, N + 1):
            a[n] -= np.trace(r_raw[n]) / xi
        A = reduce(lambda x, y: x + y, [S[k].shifted(k) for k in range(N + 1)])
        r_hat = reduce(lambda x, y: x + y, [r_reg[k].shifted(k) for k in range(1, N + 1)])
        a -= (z / xi) * chain([A, W[0], r_hat], N).trace()
        for n in range(1, N + 1):
            g_n: Optional[PhaseSeries] = None
            for m in range(1, n + 1):
                term = chain([S[n - m], W[m]], N - n) * z + chain([T[m], W[n - m]], N - n) * z
                g_n = term if g_n is None else g_n + term
            a[n:] += g_n.trace()[: N + 1 - n]

    fd_check = [complex(trace_g_derivative(grid, beta, omega0, xi, z, j, fd_step).value) for j in range(1, N + 1)]
    samples = []
    for dw in dw_samples:
        exact = trace_g(grid, beta, omega0 + dw, xi, z)
        polynomial = sum(a[j] * dw**j for j in range(N + 1))
        samples.append((float(dw), float(abs(exact - polynomial))))
    fit = _fit_remainders(samples, require_slope, "g_expansion_trace")
    fields = dict(
        kind="g_trace",
        order=N,
        beta=beta,
        omega0=omega0,
        grid=grid.label(),
        a_0=complex(a[0]),
        coefficients=[complex(c) for c in a[1:]],
        remainder_samples=samples,
        fd_check=fd_check,
        smallness=worst,
        xi=complex(xi),
        z=complex(z),
    )
    report = ExpansionReport(**_apply_fit(fields, fit))
    for j, (coefficient, fd) in enumerate(zip(report.coefficients, fd_check), start=1):
        logger.info(
            "트레이스 계수(Trace coefficient) a_%d=%s, %d! a_%d=%s, FD=%s",
            j, coefficient, j, j, math.factorial(j) * coefficient, fd,
        )
    return report

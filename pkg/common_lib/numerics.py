"""공통 수치 도구(Shared numerical helpers).

Finite-difference stencils, Richardson extrapolation, Gauss-Legendre rules
and log-log fits used across the service packages.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import stats


class Extrapolation(NamedTuple):
    """리처드슨 외삽 결과(Richardson extrapolation result)."""

    value: complex
    error: float
    table: list[list[complex]]


class LogLogFit(NamedTuple):
    """로그-로그 선형 적합(Log-log linear fit)."""

    slope: float
    intercept: float
    r_squared: float
    stderr: float
    ci_low: float
    ci_high: float
    samples: int


def stencil_points(order: int) -> int:
    """Smallest odd stencil size with at least ``order + 2`` points."""
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    points = order + 2
    return points if points % 2 == 1 else points + 1


@lru_cache(maxsize=32)
def central_difference_weights(order: int, points: int) -> tuple[tuple[int, ...], tuple[float, ...]]:
    """대칭 차분 가중치(Symmetric finite-difference weights).

    Solves the moment conditions sum_j w_j j^k = order! delta_{k,order} for
    offsets j = -m..m, so that f^(order)(x) ~ h^-order sum_j w_j f(x + j h).

    Args:
        order: Derivative order
        points: Odd number of stencil points (> order)

    Returns:
        (offsets, weights)
    """
    if points % 2 == 0 or points <= order:
        raise ValueError("points must be odd and exceed the derivative order")
    m = points // 2
    offsets = np.arange(-m, m + 1, dtype=float)
    vander = np.vander(offsets, points, increasing=True).T
    rhs = np.zeros(points)
    rhs[order] = math.factorial(order)
    weights = np.linalg.solve(vander, rhs)
    # Exact symmetry: even orders symmetric, odd orders antisymmetric.
    sign = 1.0 if order % 2 == 0 else -1.0
    weights = 0.5 * (weights + sign * weights[::-1])
    return tuple(int(o) for o in offsets), tuple(float(w) for w in weights)


def stencil_error_order(order: int, points: int) -> int:
    """Leading truncation exponent of a symmetric stencil (always even)."""
    leading = points - order
    return leading if leading % 2 == 0 else leading + 1


def richardson_extrapolate(
    base_values: Sequence[complex],
    exponents: Sequence[int],
    r: float = 2.0,
) -> Extrapolation:
    """Richardson extrapolation on a sequence of approximations.

    ``base_values[i]`` is computed with step h / r**i. The error expansion is
    assumed to contain the powers listed in ``exponents`` (e.g. 2, 4 for a
    second-order central stencil); column j of the Neville table removes
    ``exponents[j-1]``.

    Returns:
        Extrapolation with the best value, the discrepancy between the last
        two diagonal entries as error estimate, and the full table.
    """
    n = len(base_values)
    if n < 2:
        raise ValueError("richardson_extrapolate requires at least two base values.")
    table: list[list[complex]] = [[complex(v)] for v in base_values]
    for j in range(1, n):
        p = exponents[min(j - 1, len(exponents) - 1)]
        factor = r**p
        for k in range(j, n):
            improved = (factor * table[k][j - 1] - table[k - 1][j - 1]) / (factor - 1.0)
            table[k].append(improved)
    best = table[-1][-1]
    previous = table[-1][-2] if n > 1 else best
    return Extrapolation(value=best, error=float(abs(best - previous)), table=table)


class FiniteDifference(NamedTuple):
    """유한차분 도함수(Finite-difference derivative with Richardson error)."""

    value: complex
    error: float
    step: float


def richardson_derivative(
    func: Callable[[float], complex],
    x0: float,
    order: int,
    step: float,
    levels: int = 3,
) -> FiniteDifference:
    """대칭 스텐실 + 리처드슨(Central stencil of order+2 points with Richardson).

    Steps are step, step/2, ..., step/2**(levels-1); the eliminated exponents
    are the stencil error order and the following even powers. Samples shared
    between levels are evaluated once.
    """
    points = stencil_points(order)
    offsets, weights = central_difference_weights(order, points)
    leading = stencil_error_order(order, points)
    samples: dict[int, complex] = {}
    base: list[complex] = []
    for level in range(levels):
        h = step / 2**level
        scale = 2 ** (levels - 1 - level)
        total = 0j
        for offset, weight in zip(offsets, weights):
            if weight == 0.0:
                continue
            key = offset * scale
            if key not in samples:
                samples[key] = complex(func(x0 + offset * h))
            total += weight * samples[key]
        base.append(total / h**order)
    if levels == 1:
        return FiniteDifference(value=base[0], error=float("nan"), step=step)
    exponents = [leading + 2 * j for j in range(levels - 1)]
    result = richardson_extrapolate(base, exponents, 2.0)
    return FiniteDifference(value=result.value, error=result.error, step=step)


def sweep_derivative(
    func: Callable[[float], complex],
    x0: float,
    order: int,
    steps: Sequence[float],
    levels: int = 3,
) -> FiniteDifference:
    """간격 스윕(Pick the step whose Richardson discrepancy is smallest)."""
    best: FiniteDifference | None = None
    for step in steps:
        candidate = richardson_derivative(func, x0, order, step, levels)
        if best is None or candidate.error < best.error:
            best = candidate
    if best is None:
        raise ValueError("sweep_derivative needs at least one step")
    return best



@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def composite_gauss(breakpoints: Sequence[float], order: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """복합 가우스 규칙(Composite Gauss-Legendre rule over panels).

    Args:
        breakpoints: Increasing panel boundaries
        order: Nodes per panel

    Returns:
        Concatenated nodes and weights
    """
    ref_nodes, ref_weights = gauss_legendre(order)
    edges = np.asarray(breakpoints, dtype=float)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + hi) * 0.5 + half * ref_nodes[None, :]
    weights = half * ref_weights[None, :]
    return nodes.ravel(), weights.ravel()


def graded_unit_panels(levels: int = 3, ratio: float = 4.0) -> list[float]:
    """양끝으로 조밀한 [0,1] 분할(Breakpoints on [0, 1] graded towards both ends).

    levels=3, ratio=4 gives 0, 1/64, 1/16, 1/4, 3/4, 15/16, 63/64, 1.
    """
    left = [ratio ** (-k) for k in range(levels, 0, -1)]
    right = [1.0 - x for x in reversed(left)]
    return [0.0, *left, *right, 1.0]


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> LogLogFit:
    """log|y| 대 log x 적합(Fit log|y| against log x).

    Returns slope with a 95% confidence interval from the Student t law.
    Requires at least two strictly positive samples.
    """
    xs = np.asarray(x, dtype=float)
    ys = np.abs(np.asarray(y, dtype=complex))
    mask = (xs > 0) & (ys > 0) & np.isfinite(ys)
    xs, ys = xs[mask], ys[mask]
    if xs.size < 2:
        raise ValueError("log-log fit needs at least two positive samples")
    result = stats.linregress(np.log(xs), np.log(ys))
    dof = xs.size - 2
    stderr = float(result.stderr) if dof > 0 else float("nan")
    half_width = float(stats.t.ppf(0.975, dof) * stderr) if dof > 0 else float("nan")
    return LogLogFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        r_squared=float(result.rvalue**2),
        stderr=stderr,
        ci_low=float(result.slope - half_width),
        ci_high=float(result.slope + half_width),
        samples=int(xs.size),
    )


def divided_differences(x: Sequence[float], y: Sequence[complex], order: int) -> NDArray[np.complex128]:
    """Newton divided differences of the given order over consecutive windows of order + 1 nodes.

    A polynomial of degree ``order`` gives the same value (its leading
    coefficient) in every window; lower-degree terms drop out.
    """
    xs = np.asarray(x, dtype=float)
    table = np.asarray(y, dtype=complex)
    if order < 1 or xs.size < order + 1 or xs.size != table.size:
        raise ValueError("need order >= 1 and at least order + 1 matching samples")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("nodes must be strictly increasing")
    for k in range(1, order + 1):
        table = (table[1:] - table[:-1]) / (xs[k:] - xs[:-k])
    return table

"""수렴 연구와 유계성 스캔(Convergence studies and uniform-bound scans).

Both studies expand a StudyConfig into independent tasks, one per
(L, h, omega, N, z) point, run them through a TaskRunner and aggregate the
outcomes in one place. A failing task is marked and the sweep continues.
"""
from __future__ import annotations

import contextvars
import math
import platform
from dataclasses import dataclass, field
from itertools import pairwise
from typing import Any, Callable, Optional, Sequence

import numpy as np
import scipy
from tenacity import Retrying

from bulk.app.models import ThermoParams
from bulk.app.service import susceptibility_bulk
from common_lib.cache import EigenCache
from common_lib.config import get_settings
from common_lib.errors import AppException, ConfigError, DomainError, InvalidInputError, NumericalError
from common_lib.logger import get_logger
from common_lib.observability import task_ctx
from common_lib.retry_config import get_retry_strategy
from finite_gas.app.service import eigsum_summary, susceptibility_finite
from kernel_lab.app.expansion import trace_g_derivative
from spectrum.app.models import BoxGrid
from spectrum.app.service import SpectrumProvider

from .models import PointValue, StudyConfig, StudyResult, SupStatistic, TaskFailure

logger = get_logger(__name__)


@dataclass(frozen=True)
class StudyTask:
    """독립 작업 단위(One independent unit of work)."""

    label: str
    run: Callable[[], list[PointValue]]


@dataclass
class TaskOutcome:
    label: str
    points: list[PointValue] = field(default_factory=list)
    error: Optional[dict[str, Any]] = None


TaskRunner = Callable[[Sequence[StudyTask]], list[TaskOutcome]]


def execute_task(task: StudyTask) -> TaskOutcome:
    """작업 안전 실행(Run one task with solver retries; failures become a marked outcome)."""
    token = task_ctx.set(task.label)
    try:
        for attempt in Retrying(**get_retry_strategy()):
            with attempt:
                if attempt.retry_state.attempt_number > 1:
                    logger.warning("작업 재시도(Retrying task) %s", task.label)
                return TaskOutcome(task.label, task.run())
    except AppException as exc:
        logger.warning("작업 실패(Task failed) %s: %s", task.label, exc.message)
        return TaskOutcome(task.label, error=exc.to_dict()["error"])
    except Exception as exc:
        logger.warning("작업 실패(Task failed) %s", task.label, exc_info=exc)
        return TaskOutcome(task.label, error={"code": "INTERNAL_ERROR", "message": str(exc)})
    finally:
        task_ctx.reset(token)


def run_sequential(tasks: Sequence[StudyTask]) -> list[TaskOutcome]:
    return [contextvars.copy_context().run(execute_task, task) for task in tasks]


def provenance() -> dict[str, str]:
    return {"numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def _finite_point(
    provider: SpectrumProvider, spacing: float, cfg: StudyConfig, omega: float, N: int, z: complex
) -> list[PointValue]:
    p = ThermoParams(beta=cfg.beta, omega=omega, eps=cfg.eps, z=z)
    common = dict(source="finite", L=provider.grid.L, spacing=spacing, omega=omega, z=z, N=N)
    if N == 0:
        spec = provider.spectrum(omega, beta=cfg.beta)
        summary = eigsum_summary(spec, p)
        error = spec.tail_estimate * abs(summary.value)
        return [PointValue(**common, value=summary.value, method="eigsum", error_estimate=error)]
    method = cfg.finite_method if cfg.finite_method != "hellmann" or N == 1 else "eig_fd"
    result = susceptibility_finite(provider, p, N, method)
    return [PointValue(**common, value=result.value, method=result.method, error_estimate=result.error_estimate)]


def _providers(cfg: StudyConfig, spacing: float, cache: Optional[EigenCache]) -> list[SpectrumProvider]:
    grids = [BoxGrid.with_spacing(L, spacing, dim=3) for L in cfg.lengths]
    return [SpectrumProvider(grid, cfg.n3max, cache) for grid in grids]


def plan_finite(
    cfg: StudyConfig, orders: Sequence[int], spacings: Sequence[float], cache: Optional[EigenCache] = None
) -> list[StudyTask]:
    """(L, h, omega, N, z) 작업 목록(Finite-volume task list)."""
    tasks = []
    for spacing in spacings:
        for provider in _providers(cfg, spacing, cache):
            for omega in cfg.omegas:
                for N in orders:
                    for z in cfg.fugacities:
                        label = f"finite:L={provider.grid.L:g}:h={spacing:g}:omega={omega:g}:N={N}:z={z}"

                        def run(provider=provider, spacing=spacing, omega=omega, N=N, z=z) -> list[PointValue]:
                            return _finite_point(provider, spacing, cfg, omega, N, z)

                        tasks.append(StudyTask(label, run))
    return tasks


def bulk_points(cfg: StudyConfig, orders: Sequence[int]) -> list[PointValue]:
    """벌크 기준값(chi_inf^N at every (omega, N, z))."""
    points = []
    for omega in cfg.omegas:
        for N in orders:
            for z in cfg.fugacities:
                p = ThermoParams(beta=cfg.beta, omega=omega, eps=cfg.eps, z=z)
                result = susceptibility_bulk(p, N, cfg.bulk_method)
                points.append(
                    PointValue(
                        source="bulk", omega=omega, z=z, N=N, value=result.value,
                        method=result.method, error_estimate=result.error_estimate,
                    )
                )
    return points


def _check_study(cfg: StudyConfig) -> None:
    for omega in cfg.omegas:
        if omega <= 0:
            raise DomainError("omega", "bulk formulas require omega > 0", {"omega": omega})
        cfg.compact(omega).check_domain()


def _collect(outcomes: Sequence[TaskOutcome]) -> tuple[list[PointValue], list[TaskFailure]]:
    points, failures = [], []
    for outcome in outcomes:
        if outcome.error is not None:
            failures.append(TaskFailure(label=outcome.label, error=outcome.error))
        points.extend(outcome.points)
    return points, failures


def _same(a: Optional[float], b: float) -> bool:
    return a is not None and abs(a - b) <= 1e-12 * max(1.0, abs(b))


def _select(points: Sequence[PointValue], L: float, spacing: float, omega: float, N: int) -> list[PointValue]:
    return [p for p in points if _same(p.L, L) and _same(p.spacing, spacing) and _same(p.omega, omega) and p.N == N]


def is_decreasing(diffs: Sequence[tuple[float, float]], tolerant: bool) -> bool:
    """Strict decrease of (value, error) pairs; ``tolerant`` allows overlap within the summed error estimates."""
    if len(diffs) < 2:
        return False
    return all(b[0] < a[0] + ((a[1] + b[1]) if tolerant else 0.0) for a, b in pairwise(diffs))


def summarize_converge(
    cfg: StudyConfig, bulk: Sequence[PointValue], outcomes: Sequence[TaskOutcome]
) -> StudyResult:
    """단일 집계 지점(Aggregate finite and bulk values into sup_K statistics and criteria)."""
    points, failures = _collect(outcomes)
    reference = {(b.omega, b.N, b.z): b for b in bulk}
    sups: list[SupStatistic] = []
    criteria: dict[str, bool] = {}
    for omega in cfg.omegas:
        for N in cfg.orders:
            diffs = []
            for L in cfg.lengths:
                rows = _select(points, L, cfg.spacing, omega, N)
                if not rows:
                    continue
                gaps = [abs(r.value - reference[(omega, N, r.z)].value) for r in rows]
                error = max(r.error_estimate + reference[(omega, N, r.z)].error_estimate for r in rows)
                sups.append(SupStatistic(kind="finite_size", L=L, omega=omega, N=N, value=max(gaps), error_estimate=error))
                diffs.append((max(gaps), error))
                if cfg.refine_spacing is not None:
                    fine = {r.z: r for r in _select(points, L, cfg.refine_spacing, omega, N)}
                    pairs = [(r, fine[r.z]) for r in rows if r.z in fine]
                    if pairs:
                        sups.append(
                            SupStatistic(
                                kind="discretization", L=L, omega=omega, N=N,
                                value=max(abs(a.value - b.value) for a, b in pairs),
                                error_estimate=max(a.error_estimate + b.error_estimate for a, b in pairs),
                            )
                        )
            criteria[f"decreasing[omega={omega:g},N={N}]"] = is_decreasing(diffs, tolerant=N > 0)
    result = StudyResult(
        kind="converge",
        config_hash=cfg.config_hash(),
        seed=cfg.seed if cfg.seed is not None else get_settings().seed,
        versions=provenance(),
        points=points,
        bulk=list(bulk),
        sups=sups,
        metrics={"failed_tasks": float(len(failures))},
        criteria=criteria,
        failures=failures,
    )
    logger.info("수렴 연구 완료(Convergence study done): criteria=%s failures=%d", criteria, len(failures))
    return result


def converge_study(
    cfg: StudyConfig, runner: Optional[TaskRunner] = None, cache: Optional[EigenCache] = None
) -> StudyResult:
    """수렴 연구(sup_K |chi_L^N - chi_inf^N| over the L ladder).

    With ``refine_spacing`` every box is also solved at the finer spacing and the
    sup over K of the difference is reported as the discretization error.

    Raises:
        ConfigError: Fewer than two box sizes
        DomainError: omega <= 0 or a sample of K near the cut
    """
    if len(cfg.lengths) < 2:
        raise ConfigError("lengths", "convergence study needs at least two box sizes")
    _check_study(cfg)
    bulk = bulk_points(cfg, cfg.orders)
    spacings = [cfg.spacing] + ([cfg.refine_spacing] if cfg.refine_spacing is not None else [])
    outcomes = (runner or run_sequential)(plan_finite(cfg, cfg.orders, spacings, cache))
    return summarize_converge(cfg, bulk, outcomes)


def _trace_g_point(cfg: StudyConfig, L: float, omega: float, N: int, xi: complex, z: complex) -> list[PointValue]:
    common = dict(source="trace_g", L=L, spacing=cfg.spacing, omega=omega, z=z, N=N, xi=xi, method="fd_trace_g")
    if z == 0:
        return [PointValue(**common, value=0j)]
    grid = BoxGrid.with_spacing(L, cfg.spacing, dim=2)
    fd = trace_g_derivative(grid, cfg.beta, omega, xi, z, N)
    if not np.isfinite(fd.value):
        raise NumericalError("trace_g_derivative", "non-finite derivative", {"xi": str(xi), "z": str(z)})
    scale = L**grid.dim
    return [PointValue(**common, value=fd.value / scale, error_estimate=fd.error / scale)]


def plan_trace_g(cfg: StudyConfig, orders: Sequence[int]) -> list[StudyTask]:
    tasks = []
    for L in cfg.lengths:
        for omega in cfg.omegas:
            for N in orders:
                for xi in cfg.xi_samples:
                    for z in cfg.fugacities:
                        label = f"trace_g:L={L:g}:omega={omega:g}:N={N}:xi={xi}:z={z}"

                        def run(L=L, omega=omega, N=N, xi=xi, z=z) -> list[PointValue]:
                            return _trace_g_point(cfg, L, omega, N, xi, z)

                        tasks.append(StudyTask(label, run))
    return tasks


def _ratio(values: Sequence[float]) -> float:
    low = min(values)
    return math.inf if low <= 0 else max(values) / low


def summarize_bounds(cfg: StudyConfig, orders: Sequence[int], outcomes: Sequence[TaskOutcome]) -> StudyResult:
    points, failures = _collect(outcomes)
    sups: list[SupStatistic] = []
    metrics: dict[str, float] = {"failed_tasks": float(len(failures))}
    criteria: dict[str, bool] = {}
    for omega in cfg.omegas:
        for N in orders:
            chi_sups, trace_sups = [], []
            for L in cfg.lengths:
                chi = [p for p in _select(points, L, cfg.spacing, omega, N) if p.source == "finite"]
                if chi:
                    value = max(abs(p.value) for p in chi)
                    sups.append(SupStatistic(kind="sup_abs", L=L, omega=omega, N=N, value=value))
                    chi_sups.append(value)
                traces = [p for p in _select(points, L, cfg.spacing, omega, N) if p.source == "trace_g"]
                if traces:
                    value = max(abs(p.value) for p in traces)
                    error = max(p.error_estimate for p in traces)
                    sups.append(SupStatistic(kind="trace_g", L=L, omega=omega, N=N, value=value, error_estimate=error))
                    trace_sups.append(value)
            tag = f"omega={omega:g},N={N}"
            if len(chi_sups) >= 2:
                metrics[f"ratio[{tag}]"] = _ratio(chi_sups)
                criteria[f"bounded[{tag}]"] = metrics[f"ratio[{tag}]"] <= cfg.ratio_tolerance
            if len(trace_sups) >= 2:
                metrics[f"trace_g_spread[{tag}]"] = _ratio(trace_sups) - 1.0
                criteria[f"trace_g_spread[{tag}]"] = metrics[f"trace_g_spread[{tag}]"] <= cfg.spread_tolerance
    logger.info("유계성 스캔 완료(Uniform-bound scan done): %s", metrics)
    return StudyResult(
        kind="bounds",
        config_hash=cfg.config_hash(),
        seed=cfg.seed if cfg.seed is not None else get_settings().seed,
        versions=provenance(),
        points=points,
        sups=sups,
        metrics=metrics,
        criteria=criteria,
        failures=failures,
    )


def uniform_bound_scan(
    cfg: StudyConfig, runner: Optional[TaskRunner] = None, cache: Optional[EigenCache] = None
) -> StudyResult:
    """유계성 스캔(max/min over L of sup_K |chi_L^N| and of sup_xi sup_z |d^N Tr g| / L^dim).

    Only orders N >= 1 take part.
    """
    orders = [N for N in cfg.orders if N >= 1]
    if not orders:
        raise InvalidInputError("orders", "uniform-bound scan needs an order N >= 1", {"orders": list(cfg.orders)})
    _check_study(cfg)
    tasks = plan_finite(cfg, orders, [cfg.spacing], cache) + plan_trace_g(cfg, orders)
    outcomes = (runner or run_sequential)(tasks)
    return summarize_bounds(cfg, orders, outcomes)

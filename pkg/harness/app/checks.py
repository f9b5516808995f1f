"""검증 레지스트리(Registry of named verification checks).

Every check returns (passed, metrics, message) and is wrapped into a
CheckResult with its wall time. Checks run at desk scale; the heaviest
(remainder orders, convergence) take minutes.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg

from bulk.app.models import ThermoParams
from bulk.app.service import free_gas_pressure, pressure_bulk, pressure_z_derivative
from common_lib.cache import EigenCache
from common_lib.config import get_settings
from common_lib.errors import AppException, InvalidInputError
from common_lib.logger import get_logger
from common_lib.numerics import fit_loglog
from finite_gas.app.models import FugacityCompact
from finite_gas.app.service import (
    build_contour,
    pressure_contour,
    pressure_eigsum,
    susceptibility_finite,
    trace_norm_bound_check,
)
from kernel_lab.app.corrections import resolvent_identity_residual
from kernel_lab.app.expansion import flux_moment_scaling, g_expansion_trace, semigroup_expansion, trace_g_scaling
from kernel_lab.app.kernels import (
    flux_triangle,
    free_heat_kernel,
    heat_kernel_grid,
    regularize,
    semigroup_defect,
)
from kernel_lab.app.models import GridKernel
from special_fn.app.models import Statistics
from special_fn.app.service import f_integral, f_series
from spectrum.app.models import BoxGrid
from spectrum.app.service import SpectrumProvider, build_magnetic_hamiltonian_2d, eigen_spectrum

from .models import CheckResult, StudyConfig, VerifyReport
from .service import TaskRunner, converge_study, uniform_bound_scan

logger = get_logger(__name__)

Outcome = tuple[bool, dict[str, float], str]

# one decade in delta omega
REMAINDER_STEPS = [0.01, 0.02, 0.04, 0.1]


@dataclass
class CheckContext:
    """검사 공유 상태(Seeded generator, eigen cache, study config and runner shared by checks)."""

    seed: int
    config: StudyConfig = field(default_factory=StudyConfig)
    runner: Optional[TaskRunner] = None
    cache: EigenCache = field(default_factory=lambda: EigenCache(max_entries=64))

    def __post_init__(self) -> None:
        self.rng = np.random.default_rng(self.seed)

    @cached_property
    def box_spectrum(self):
        """L=8, n=32 box at beta=1, omega=1, shared by the contour checks."""
        provider = SpectrumProvider(BoxGrid(L=8.0, n=32, dim=3), n3max=32, cache=self.cache)
        return provider.spectrum(1.0, beta=1.0)


CheckFunction = Callable[[CheckContext], Outcome]
CHECKS: dict[str, CheckFunction] = {}


def register(name: str) -> Callable[[CheckFunction], CheckFunction]:
    def decorator(fn: CheckFunction) -> CheckFunction:
        CHECKS[name] = fn
        return fn

    return decorator


# ---------------------------------------------------------------------------
# special_fn / bulk
# ---------------------------------------------------------------------------

@register("special-functions")
def check_special_functions(ctx: CheckContext) -> Outcome:
    r = 0.9 * np.sqrt(ctx.rng.uniform(0.0, 1.0, 40))
    zetas = r * np.exp(1j * ctx.rng.uniform(-math.pi, math.pi, 40))
    worst = 0.0
    for eps in Statistics:
        for sigma in (0.5, 1.0, 1.5, 2.5):
            for zeta in zetas:
                series, _ = f_series(sigma, zeta, eps)
                worst = max(worst, abs(series - f_integral(sigma, zeta, eps)) / abs(series))
    log_gap = max(
        abs(f_integral(1.0, zeta, Statistics.FERMI) - math.log1p(zeta)) / max(1.0, math.log1p(zeta))
        for zeta in np.linspace(0.0, 2.0, 21)
    )
    passed = worst <= 1e-10 and log_gap <= 1e-12
    return passed, {"max_rel_series_integral": worst, "max_fermi_log_gap": log_gap}, f"series/integral {worst:.1e}"


@register("bulk-free-limit")
def check_bulk_free_limit(ctx: CheckContext) -> Outcome:
    metrics = {}
    for eps in Statistics:
        bulk = pressure_bulk(ThermoParams(beta=1.0, omega=1e-3, eps=eps, z=0.5)).value
        free = free_gas_pressure(1.0, 0.5, eps)
        metrics[f"rel_gap_{eps.label}"] = abs(bulk - free) / abs(free)
    return all(v <= 1e-5 for v in metrics.values()), metrics, "omega beta = 1e-3 against the free gas"


@register("bulk-analyticity")
def check_bulk_analyticity(ctx: CheckContext) -> Outcome:
    p = ThermoParams(beta=1.0, omega=1.0, eps="fermi", z=0.4 + 0.2j)
    h = 1e-5
    along_real = (pressure_bulk(p.with_z(p.z + h)).value - pressure_bulk(p.with_z(p.z - h)).value) / (2 * h)
    along_imag = (pressure_bulk(p.with_z(p.z + 1j * h)).value - pressure_bulk(p.with_z(p.z - 1j * h)).value) / (2j * h)
    exact = pressure_z_derivative(p)
    gap = max(abs(exact - along_real), abs(exact - along_imag))
    return gap < 1e-8, {"cauchy_riemann_gap": gap}, "dP/dz direction independent"


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------

@register("spectrum-convergence")
def check_spectrum_convergence(ctx: CheckContext) -> Outcome:
    sizes = [16, 24, 32, 48]
    errors = []
    for n in sizes:
        ground = eigen_spectrum(build_magnetic_hamiltonian_2d(BoxGrid(L=1.0, n=n), 0.0), 1).ground
        errors.append(abs(ground - math.pi**2))
    slope = fit_loglog(sizes, errors).slope
    return abs(slope + 2.0) <= 0.1, {"slope": slope}, f"ground-state error ~ n^{slope:.2f}"


@register("gauge-invariance")
def check_gauge_invariance(ctx: CheckContext) -> Outcome:
    grid = BoxGrid(L=4.0, n=16)

    def chi(x1, x2):
        return 0.37 * x1 * x2

    H = build_magnetic_hamiltonian_2d(grid, 1.3)
    H_chi = build_magnetic_hamiltonian_2d(grid, 1.3, gauge_chi=chi, gauge_label="c=0.37")
    shift = float(np.max(np.abs(linalg.eigvalsh(H_chi.matrix) - linalg.eigvalsh(H.matrix))))
    return shift <= 1e-10, {"max_eigenvalue_shift": shift}, "chi = 0.37 x1 x2"


@register("diamagnetic-ground-state")
def check_diamagnetic_ground_state(ctx: CheckContext) -> Outcome:
    grid = BoxGrid(L=4.0, n=20)
    free = eigen_spectrum(build_magnetic_hamiltonian_2d(grid, 0.0), 1).ground
    margins = {
        f"margin_omega={omega:g}": eigen_spectrum(build_magnetic_hamiltonian_2d(grid, omega), 1).ground - free
        for omega in (0.5, 1.0, 2.0)
    }
    return all(m >= 0 for m in margins.values()), margins, "E0(omega) >= E0(0)"


# ---------------------------------------------------------------------------
# finite_gas
# ---------------------------------------------------------------------------

@register("contour-equivalence")
def check_contour_equivalence(ctx: CheckContext) -> Outcome:
    spec = ctx.box_spectrum
    metrics = {}
    for eps in Statistics:
        for z in (0.3, 0.5j):
            p = ThermoParams(beta=1.0, omega=1.0, eps=eps, z=z)
            K = FugacityCompact.from_values([z], beta=1.0, omega=1.0, eps=eps)
            direct = pressure_eigsum(spec, p)
            contour = pressure_contour(spec, p, build_contour(K, 1.0, 1.0, spec))
            metrics[f"rel_gap_{eps.label}_z={z}"] = abs(contour - direct) / abs(direct)
    return all(v <= 1e-8 for v in metrics.values()), metrics, "L=8, n=32"


@register("contour-independence")
def check_contour_independence(ctx: CheckContext) -> Outcome:
    spec = ctx.box_spectrum
    p = ThermoParams(beta=1.0, omega=1.0, eps="fermi", z=0.3 + 0.2j)
    K = FugacityCompact.from_values([p.z], beta=1.0, omega=1.0, eps="fermi")
    contour = build_contour(K, 1.0, 1.0, spec, 128)
    value = pressure_contour(spec, p, contour)
    refined = abs(pressure_contour(spec, p, contour.refined()) - value)
    moved = abs(pressure_contour(spec, p, build_contour(K, 1.0, 1.0, spec, 256, radius=0.8)) - value)
    metrics = {"refinement_gap": refined, "radius_gap": moved}
    return max(refined, moved) < 1e-10, metrics, f"radius {contour.radius:.3f} vs 0.8"


@register("susceptibility-methods")
def check_susceptibility_methods(ctx: CheckContext) -> Outcome:
    provider = SpectrumProvider(BoxGrid(L=8.0, n=12, dim=3), n3max=12, cache=ctx.cache)
    p = ThermoParams(beta=1.0, omega=1.0, eps="fermi", z=0.5)
    eig = {N: susceptibility_finite(provider, p, N, "eig_fd").value for N in (1, 2)}
    hellmann = susceptibility_finite(provider, p, 1, "hellmann").value
    metrics = {"hellmann_vs_eig_fd": abs(hellmann - eig[1]) / abs(eig[1])}
    for N in (1, 2):
        contour = susceptibility_finite(provider, p, N, "contour_fd").value
        metrics[f"eig_vs_contour_N={N}"] = abs(contour - eig[N]) / abs(eig[N])
    passed = metrics["hellmann_vs_eig_fd"] <= 1e-4 and all(
        metrics[f"eig_vs_contour_N={N}"] <= 1e-6 for N in (1, 2)
    )
    return passed, metrics, "fermi z=0.5 at L=8, n=12"


@register("trace-norm-bound")
def check_trace_norm_bound(ctx: CheckContext) -> Outcome:
    spec = ctx.box_spectrum
    K = FugacityCompact.disc(0.5, 16, beta=1.0, omega=1.0)
    result = trace_norm_bound_check(spec, K, build_contour(K, 1.0, 1.0, spec))
    metrics = {
        "max_trace_norm": result.max_trace_norm,
        "bound": result.bound,
        "discretization_factor": result.discretization_factor,
    }
    return result.passed, metrics, "||g_L||_1 on the contour, |z| <= 0.5"


# ---------------------------------------------------------------------------
# kernel_lab
# ---------------------------------------------------------------------------

@register("diamagnetic")
def check_diamagnetic(ctx: CheckContext) -> Outcome:
    grid = BoxGrid(L=4.0, n=32)
    free = heat_kernel_grid(grid, 1.0, 0.0, ctx.cache).values.real
    continuum = free_heat_kernel(grid, 1.0).values.real
    support = free > 1e-6 * free.max()
    metrics: dict[str, float] = {}
    passed = True
    for omega in (0.5, 1.0, 2.0):
        G = np.abs(heat_kernel_grid(grid, 1.0, omega, ctx.cache).values)
        ratio = G[support] / free[support]
        dominated = bool(np.all(G <= free * (1 + 1e-9) + 1e-12 * free.max()))
        metrics[f"max_ratio[omega={omega:g}]"] = float(ratio.max())
        metrics[f"min_ratio[omega={omega:g}]"] = float(ratio.min())
        metrics[f"max_ratio_continuum[omega={omega:g}]"] = float(np.max(G / continuum))
        # the field must actually suppress the kernel somewhere
        passed = passed and dominated and float(ratio.min()) <= 0.99
    return passed, metrics, "|G_omega| <= G_0 on the L=4, n=32 lattice"


@register("trace-bound")
def check_trace_bound(ctx: CheckContext) -> Outcome:
    grid = BoxGrid(L=6.0, n=32)
    bound = grid.L**grid.dim / (2.0 * math.pi)
    trace = heat_kernel_grid(grid, 1.0, 1.0, ctx.cache).trace().real
    return trace <= 1.05 * bound, {"trace": trace, "gibbs_bound": bound}, f"ratio {trace / bound:.4f}"


@register("semigroup")
def check_semigroup(ctx: CheckContext) -> Outcome:
    defect = semigroup_defect(BoxGrid(L=3.0, n=12), 0.4, 0.6, 1.0, ctx.cache)
    return defect <= 1e-8, {"defect": defect}, "W(0.4) W(0.6) = W(1)"


@register("flux-bound")
def check_flux_bound(ctx: CheckContext) -> Outcome:
    triples = ctx.rng.uniform(-3.0, 3.0, size=(10000, 3, 2))
    worst = 0.0
    for x, y, x2 in triples:
        side = np.linalg.norm(x - y) * np.linalg.norm(y - x2)
        if side > 0:
            worst = max(worst, abs(flux_triangle(x, y, x2)) / side)
    return worst <= 1.0 + 1e-12, {"max_flux_ratio": worst}, "|fl| <= |x - y| |y - x'|"


@register("regularized-trace")
def check_regularized_trace(ctx: CheckContext) -> Outcome:
    grid = BoxGrid(L=3.0, n=6)
    mismatches = 0
    for _ in range(50):
        size = grid.n**2
        k = GridKernel(ctx.rng.normal(size=(size, size)) + 1j * ctx.rng.normal(size=(size, size)), grid)
        dw = float(ctx.rng.uniform(-2.0, 2.0))
        mismatches += int(regularize(k, dw).trace() != k.trace())
    return mismatches == 0, {"mismatches": float(mismatches)}, "50 random kernels"


@register("resolvent-identity")
def check_resolvent_identity(ctx: CheckContext) -> Outcome:
    xi = 0.65 * complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
    metrics = {
        f"residual_n={n}": resolvent_identity_residual(BoxGrid(L=3.0, n=n), 1.0, 1.0, xi, 0.5, 0.1, ctx.cache)
        for n in (16, 24, 32)
    }
    return all(v <= 1e-10 for v in metrics.values()), metrics, "exact on the Peierls lattice"


@register("remainder-orders")
def check_remainder_orders(ctx: CheckContext) -> Outcome:
    grid = BoxGrid(L=6.0, n=24)
    xi = 0.65 * complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
    metrics = {}
    for N in (1, 2):
        semigroup = semigroup_expansion(grid, 1.0, 1.0, N, REMAINDER_STEPS, require_slope=True, cache=ctx.cache)
        trace = g_expansion_trace(grid, 1.0, 1.0, xi, 0.5, N, REMAINDER_STEPS, require_slope=True, cache=ctx.cache)
        metrics[f"semigroup_slope_N={N}"] = semigroup.slope
        metrics[f"trace_slope_N={N}"] = trace.slope
    passed = all(abs(metrics[f"{kind}_slope_N={N}"] - (N + 1)) <= 0.3 for kind in ("semigroup", "trace") for N in (1, 2))
    return passed, metrics, "semigroup and Tr g remainders at L=6, n=24"


@register("trace-coefficients")
def check_trace_coefficients(ctx: CheckContext) -> Outcome:
    grid = BoxGrid(L=6.0, n=24)
    xi = 0.65 * complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
    metrics = {}
    for N in (1, 2):
        report = g_expansion_trace(grid, 1.0, 1.0, xi, 0.5, N, [0.02, 0.04], cache=ctx.cache)
        a_N, fd = report.coefficients[N - 1], report.fd_check[N - 1]
        metrics[f"rel_gap_N={N}"] = abs(math.factorial(N) * a_N - fd) / abs(fd)
    return all(v <= 0.05 for v in metrics.values()), metrics, "N! a_N against finite differences"


@register("volume-scaling")
def check_volume_scaling(ctx: CheckContext) -> Outcome:
    grids = [BoxGrid.with_spacing(L, 0.4) for L in (6.0, 8.0, 10.0, 12.0)]
    xi = 0.65 * complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
    scalings = [
        flux_moment_scaling(grids, 1.0, 1.0, 0, 1, cache=ctx.cache),
        flux_moment_scaling(grids, 1.0, 1.0, 2, 2, family="Gg", xi=xi, z=0.5, cache=ctx.cache),
        trace_g_scaling(grids, 1.0, 1.0, xi, 0.5, N=1),
        trace_g_scaling(grids, 1.0, 1.0, xi, 0.5, N=2),
    ]
    metrics: dict[str, float] = {}
    for s in scalings:
        if s.exponent is not None:
            metrics[f"exponent[{s.quantity}]"] = s.exponent
        metrics[f"raw_slope[{s.quantity}]"] = s.raw_slope
        metrics[f"fit_residual[{s.quantity}]"] = s.fit_residual
    passed = all(s.obeys_volume_law(0.15) for s in scalings)
    return passed, metrics, "bulk exponent of d_{m,n} and d^N Tr g over L = 6..12 at h = 0.4"


# ---------------------------------------------------------------------------
# harness studies
# ---------------------------------------------------------------------------

@register("convergence")
def check_convergence(ctx: CheckContext) -> Outcome:
    result = converge_study(ctx.config, ctx.runner, ctx.cache)
    metrics = {f"sup_diff[L={s.L:g},N={s.N}]": s.value for s in result.sups if s.kind == "finite_size"}
    metrics["failed_tasks"] = float(len(result.failures))
    return result.passed and not result.failures, metrics, ", ".join(f"{k}={v}" for k, v in result.criteria.items())


@register("uniform-bound")
def check_uniform_bound(ctx: CheckContext) -> Outcome:
    result = uniform_bound_scan(ctx.config, ctx.runner, ctx.cache)
    return result.passed and not result.failures, dict(result.metrics), f"{len(result.criteria)} criteria"


def resolve_selection(selection: Sequence[str]) -> list[str]:
    """'all' expands to every registered check; unknown names raise InvalidInputError."""
    names: list[str] = []
    for name in selection:
        if name == "all":
            names.extend(n for n in CHECKS if n not in names)
        elif name not in CHECKS:
            raise InvalidInputError("selection", f"unknown check '{name}'", {"available": sorted(CHECKS)})
        elif name not in names:
            names.append(name)
    return names


def run_check(name: str, ctx: CheckContext) -> CheckResult:
    start = time.perf_counter()
    try:
        passed, metrics, message = CHECKS[name](ctx)
    except AppException as exc:
        passed, metrics, message = False, {}, f"{exc.error_code}: {exc.message}"
    except Exception as exc:
        logger.exception("검사 예외(Check raised) %s", name)
        passed, metrics, message = False, {}, f"INTERNAL_ERROR: {exc}"
    seconds = time.perf_counter() - start
    logger.info("검사 %s(Check %s): %s in %.2fs", "통과" if passed else "실패", name, message, seconds)
    return CheckResult(name=name, passed=bool(passed), metrics=metrics, message=message, seconds=seconds)


def verify_suite(
    selection: Sequence[str],
    config: Optional[StudyConfig] = None,
    runner: Optional[TaskRunner] = None,
    seed: Optional[int] = None,
) -> VerifyReport:
    """검증 스위트(Run the named checks; an empty selection passes vacuously)."""
    names = resolve_selection(selection)
    seed = seed if seed is not None else (config.seed if config and config.seed is not None else get_settings().seed)
    ctx = CheckContext(seed=seed, config=config or StudyConfig(), runner=runner)
    report = VerifyReport(selection=list(selection), seed=seed)
    for name in names:
        report.checks.append(run_check(name, ctx))
    return report

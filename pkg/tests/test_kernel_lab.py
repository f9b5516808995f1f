"""
Kernel Lab Test Suite
1. Magnetic phases and fluxes
2. Heat kernels, Schur-Holmgren norm and g kernels
3. Regularization and correction kernels
4. Simplex integrals and the semigroup expansion
5. Resolvent identity and trace coefficients
6. Flux moments, volume scaling and report export
"""
import math
import os
import sys

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import linalg

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from common_lib.cache import EigenCache
from common_lib.errors import DomainError, InvalidInputError, NumericalError, UnsupportedMethodError
from common_lib.numerics import fit_loglog
from kernel_lab.app.corrections import (
    correction_kernels,
    lattice_correction,
    r_hat,
    regularize_reference,
    resolvent_identity_residual,
)
from kernel_lab.app.expansion import (
    PhaseSeries,
    compositions,
    flux_moment,
    flux_moment_scaling,
    g_expansion_trace,
    semigroup_coefficients,
    semigroup_expansion,
    simplex_integral,
    trace_g_scaling,
    trace_moments,
    volume_scaling,
    weak_compositions,
)
from kernel_lab.app.kernels import (
    decay_fit,
    flux_chain,
    flux_triangle,
    free_heat_kernel,
    g_kernel,
    gauge_conjugation_check,
    heat_kernel_grid,
    magnetic_phase,
    plane_geometry,
    regularize,
    schur_holmgren_norm,
    semigroup_defect,
    semigroup_operator,
)
from kernel_lab.app.models import ExpansionReport, FluxChain, GridKernel, slope_supported
from kernel_lab.app.repository import ReportRepository
from spectrum.app.models import BoxGrid
from spectrum.app.service import build_magnetic_hamiltonian_2d, eigen_system

SMALL = BoxGrid(L=3.0, n=8)
XI = 0.65 * complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
CACHE = EigenCache(max_entries=64)
DW = [0.01, 0.02, 0.04, 0.1]


def _sine_kernel_1d(L, x, beta, terms=60):
    k = np.arange(1, terms + 1)
    modes = np.sqrt(2.0 / L) * np.sin(np.outer(x + 0.5 * L, k) * math.pi / L)
    return (modes * np.exp(-beta * (math.pi * k / L) ** 2 / 2)) @ modes.T


def _lattice_semigroup_1d(n, h, beta):
    i = np.arange(1, n + 1)
    k = np.arange(1, n + 1)
    vectors = np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(i, k) * math.pi / (n + 1))
    levels = (1.0 - np.cos(k * math.pi / (n + 1))) / h**2
    return (vectors * np.exp(-beta * levels)) @ vectors.T


# ============================================================================
# TEST 1: Phases and fluxes
# ============================================================================

def test_magnetic_phase_values():
    assert magnetic_phase((0.3, -1.2), (0.3, -1.2)) == 0.0
    assert magnetic_phase((1.0, 0.0), (0.0, 1.0)) == -0.5
    rng = np.random.default_rng(11)
    for x, y in rng.uniform(-2, 2, size=(100, 2, 2)):
        assert magnetic_phase(x, y) + magnetic_phase(y, x) == pytest.approx(0.0, abs=1e-15)


def test_flux_chain_examples():
    assert flux_chain(FluxChain(base=(0.4, 0.1), chain=((-1.0, 2.0),))) == pytest.approx(0.0, abs=1e-15)
    assert flux_chain(FluxChain(base=(0.0, 0.0), chain=((1.0, 0.0), (1.0, 1.0)))) == pytest.approx(-0.5)
    assert flux_chain(FluxChain(base=(0.0, 0.0), chain=((1.0, 1.0), (2.0, 2.0)))) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValidationError):
        FluxChain(base=(0.0, 0.0), chain=())


def test_flux_bounded_by_side_lengths():
    rng = np.random.default_rng(5)
    for x, y, x2 in rng.uniform(-3, 3, size=(10000, 3, 2)):
        bound = np.linalg.norm(x - y) * np.linalg.norm(y - x2)
        assert abs(flux_triangle(x, y, x2)) <= bound + 1e-12


# ============================================================================
# TEST 2: Heat kernels, Schur-Holmgren norm and g kernels
# ============================================================================

def test_heat_kernel_matches_discrete_sine_modes():
    grid = BoxGrid(L=3.0, n=12)
    W1 = _lattice_semigroup_1d(grid.n, grid.h, 1.0)
    G = heat_kernel_grid(grid, 1.0, 0.0, CACHE)
    assert np.max(np.abs(G.operator - np.kron(W1, W1))) <= 1e-10
    assert G.is_hermitian()


def test_heat_kernel_converges_to_sine_series():
    errors = []
    for n in (15, 31):
        grid = BoxGrid(L=3.0, n=n)
        K1 = _sine_kernel_1d(grid.L, grid.axis(), 1.0)
        G = heat_kernel_grid(grid, 1.0, 0.0, CACHE)
        errors.append(np.max(np.abs(G.values - np.kron(K1, K1))))
    # h halves exactly between the two grids
    assert 3.5 <= errors[0] / errors[1] <= 4.5
    assert errors[1] <= 1e-3


def test_heat_kernel_trace_bound():
    grid = BoxGrid(L=6.0, n=16)
    for omega in (0.0, 1.0):
        trace = heat_kernel_grid(grid, 1.0, omega, CACHE).trace()
        assert abs(trace.imag) <= 1e-10
        assert 0.0 < trace.real <= grid.L**2 / (2 * math.pi) * 1.05


@pytest.mark.parametrize("omega", [0.5, 1.0, 2.0])
def test_diamagnetic_inequality(omega):
    grid = BoxGrid(L=3.0, n=12)
    G = heat_kernel_grid(grid, 1.0, omega, CACHE).values
    G0 = heat_kernel_grid(grid, 1.0, 0.0, CACHE).values.real
    assert np.all(np.abs(G) <= G0 * (1 + 1e-9) + 1e-12 * G0.max())
    # strict somewhere: the Peierls phase suppresses the off-diagonal kernel
    far = G0 > 1e-6 * G0.max()
    assert np.min(np.abs(G)[far] / G0[far]) < 0.99


def test_semigroup_property_and_gauge_conjugation():
    assert semigroup_defect(SMALL, 0.4, 0.6, 1.0, CACHE) <= 1e-8
    G = heat_kernel_grid(SMALL, 1.0, 1.0, CACHE)
    assert gauge_conjugation_check(G, 0.3, c=(0.5, -0.2)) <= 1e-10


def test_schur_holmgren_norm():
    grid = BoxGrid(L=3.0, n=6)
    identity = GridKernel(np.eye(36) / grid.weight, grid)
    assert schur_holmgren_norm(identity) == pytest.approx(1.0)
    assert schur_holmgren_norm(free_heat_kernel(SMALL, 1.0)) <= 1.0 + 1e-12
    rng = np.random.default_rng(3)
    for _ in range(20):
        k = GridKernel(rng.normal(size=(36, 36)) + 1j * rng.normal(size=(36, 36)), grid)
        assert schur_holmgren_norm(k) >= k.operator_norm() * (1 - 1e-12)


def test_g_kernel_basics():
    assert np.all(g_kernel(SMALL, 1.0, 1.0, XI, 0.0, CACHE).values == 0)
    g = g_kernel(SMALL, 1.0, 1.0, XI, 0.5, CACHE)
    weights = np.exp(-eigen_system(SMALL, 1.0, cache=CACHE).values)
    resolvent = 1.0 / np.min(np.abs(XI - 0.5 * weights))
    assert g.trace_norm() <= 0.5 * resolvent * weights.sum() * (1 + 1e-12)
    ground = weights.max()
    with pytest.raises(DomainError):
        g_kernel(SMALL, 1.0, 1.0, 0.5 * ground, 0.5, CACHE)


def test_g_kernel_off_diagonal_decay():
    grid = BoxGrid(L=8.0, n=20)
    decay = decay_fit(g_kernel(grid, 1.0, 1.0, XI, 0.5, CACHE))
    assert decay.rate > 0
    assert decay.r_squared >= 0.9


def test_g_kernel_small_fugacity():
    W = heat_kernel_grid(SMALL, 1.0, 1.0, CACHE).operator
    zs = [1e-3, 2e-3, 4e-3, 8e-3]
    gaps = [linalg.norm(g_kernel(SMALL, 1.0, 1.0, XI, z, CACHE).operator - (z / XI) * W, 2) for z in zs]
    assert fit_loglog(zs, gaps).slope == pytest.approx(2.0, abs=0.05)


# ============================================================================
# TEST 3: Regularization and correction kernels
# ============================================================================

def test_regularize_keeps_diagonal_and_trace():
    G = heat_kernel_grid(SMALL, 1.0, 1.0, CACHE)
    assert regularize(G, 0.0) is G
    reg = regularize(G, 0.37)
    assert np.array_equal(np.diag(reg.values), np.diag(G.values))
    assert reg.trace() == G.trace()
    assert not np.allclose(reg.values, G.values)


def test_correction_kernel_examples():
    R2 = correction_kernels(SMALL, 1.0, 1.0, "R2", cache=CACHE)
    assert np.all(np.diag(R2.values) == 0)
    r1 = correction_kernels(SMALL, 1.0, 1.0, "rN", order=1, xi=XI, z=0.0, cache=CACHE)
    assert np.all(r1.values == 0)
    with pytest.raises(InvalidInputError):
        correction_kernels(SMALL, 1.0, 1.0, "rN", order=2)
    with pytest.raises(UnsupportedMethodError):
        correction_kernels(SMALL, 1.0, 1.0, "R3")


def test_first_correction_is_covariant_gradient_form():
    geometry = plane_geometry(SMALL, 1.0)
    W0 = semigroup_operator(eigen_system(SMALL, 1.0, cache=CACHE), 1.0)
    R1 = correction_kernels(SMALL, 1.0, 1.0, "R1", cache=CACHE).operator
    rho1 = lattice_correction(geometry, W0, 1)
    assert np.max(np.abs(R1 - rho1)) <= 1e-12 * np.max(np.abs(R1))
    assert np.all(np.diag(lattice_correction(geometry, W0, 2)) == 0)


def test_lattice_correction_series_is_exact():
    omega0, dw = 1.0, 0.1
    geometry = plane_geometry(SMALL, omega0)
    W0 = semigroup_operator(eigen_system(SMALL, omega0, cache=CACHE), 0.5)
    H0 = build_magnetic_hamiltonian_2d(SMALL, omega0).matrix
    H = build_magnetic_hamiltonian_2d(SMALL, omega0 + dw).matrix
    Phi = geometry.phase_factor(dw)
    lhs = H @ (Phi * W0) - Phi * (H0 @ W0)
    rhs = Phi * sum(dw**m * lattice_correction(geometry, W0, m) for m in range(1, 16))
    assert linalg.norm(lhs - rhs, 2) <= 1e-10 * linalg.norm(lhs, 2)


def test_r_hat_differs_from_regularized_reference():
    reference = regularize_reference(SMALL, 1.0, 1.0, XI, 0.5, 0.1, CACHE)
    hat = r_hat(SMALL, 1.0, 1.0, XI, 0.5, 0.1, CACHE)
    assert np.all(reference.values == 0)
    assert hat.operator_norm() > 1e-6


@pytest.mark.slow
def test_flux_correction_schur_norm_uniform_in_L():
    grids = [BoxGrid.with_spacing(L, 0.4) for L in (6.0, 8.0, 10.0)]
    for order in (1, 2):
        norms = [
            schur_holmgren_norm(correction_kernels(g, 1.0, 1.0, "rN", order=order, xi=XI, z=0.5, cache=CACHE))
            for g in grids
        ]
        assert max(norms) <= 1.2 * min(norms)


# ============================================================================
# TEST 4: Simplex integrals and the semigroup expansion
# ============================================================================

def test_compositions():
    assert list(compositions(3)) == [(3,), (1, 2), (2, 1), (1, 1, 1)]
    assert list(weak_compositions(1, 2)) == [(0, 1), (1, 0)]


def test_phase_series_matches_exact_phase():
    geometry = plane_geometry(SMALL, 1.0)
    W0 = heat_kernel_grid(SMALL, 1.0, 1.0, CACHE).operator
    series = PhaseSeries.regularized(W0, geometry.phase, 3)
    errors = [np.max(np.abs(series.evaluate(dw) - geometry.phase_factor(dw) * W0)) for dw in (0.05, 0.1)]
    assert errors[0] / errors[1] == pytest.approx(1 / 16, rel=0.2)


def test_first_simplex_integral_matches_duhamel():
    beta, omega0, d = 1.0, 1.0, 1e-4
    I1 = simplex_integral(SMALL, beta, omega0, [1], cache=CACHE).operator
    W0 = heat_kernel_grid(SMALL, beta, omega0, CACHE).operator
    plus = heat_kernel_grid(SMALL, beta, omega0 + d, CACHE).operator
    minus = heat_kernel_grid(SMALL, beta, omega0 - d, CACHE).operator
    derivative = (plus - minus) / (2 * d) - 1j * plane_geometry(SMALL, omega0).phase * W0
    assert linalg.norm(-I1 - derivative, 2) <= 1e-4 * linalg.norm(derivative, 2)


def test_simplex_quadrature_refinement():
    coarse = simplex_integral(SMALL, 1.0, 1.0, [1], quad_order=8, cache=CACHE).trace()
    fine = simplex_integral(SMALL, 1.0, 1.0, [1], quad_order=16, cache=CACHE).trace()
    assert abs(coarse - fine) <= 1e-6 * abs(fine)


def test_simplex_validation():
    with pytest.raises(InvalidInputError):
        simplex_integral(SMALL, 1.0, 1.0, [])
    with pytest.raises(InvalidInputError):
        simplex_integral(SMALL, 1.0, 1.0, [1, 1, 1, 1])
    with pytest.raises(NumericalError):
        simplex_integral(SMALL, 1.0, 1.0, [1, 1, 1], quad_order=40)


def test_semigroup_expansion_at_zero_offset():
    report = semigroup_expansion(SMALL, 1.0, 1.0, 1, [0.0], cache=CACHE)
    assert report.remainder_samples == [(0.0, 0.0)]
    assert report.slope is None
    first = semigroup_coefficients(SMALL, 1.0, 1.0, 1, cache=CACHE)[0].terms[0]
    I1 = simplex_integral(SMALL, 1.0, 1.0, [1], cache=CACHE).operator
    assert np.max(np.abs(first + I1)) <= 1e-12 * np.max(np.abs(I1))


@pytest.mark.parametrize("N", [1, 2])
def test_semigroup_remainder_order(N):
    report = semigroup_expansion(SMALL, 1.0, 1.0, N, DW, require_slope=True, cache=CACHE)
    assert report.slope == pytest.approx(N + 1, abs=0.1 * (N + 1))
    assert report.slope_ci[0] <= report.slope <= report.slope_ci[1]


def test_semigroup_expansion_validation():
    with pytest.raises(InvalidInputError):
        semigroup_expansion(SMALL, 1.0, 1.0, 3, DW)
    with pytest.raises(NumericalError):
        semigroup_expansion(SMALL, 1.0, 1.0, 1, [0.02, 0.04], require_slope=True, cache=CACHE)


@pytest.mark.slow
@pytest.mark.parametrize("N", [1, 2])
def test_semigroup_remainder_order_reference_grid(N):
    grid = BoxGrid(L=6.0, n=24)
    report = semigroup_expansion(grid, 1.0, 1.0, N, DW, require_slope=True, cache=CACHE)
    assert report.slope == pytest.approx(N + 1, abs=0.1 * (N + 1))


# ============================================================================
# TEST 5: Resolvent identity and trace coefficients
# ============================================================================

@pytest.mark.parametrize("n", [8, 12, 16])
def test_resolvent_identity_is_exact_on_the_lattice(n):
    grid = BoxGrid(L=3.0, n=n)
    assert resolvent_identity_residual(grid, 1.0, 1.0, XI, 0.5, 0.1, CACHE) <= 1e-10


@pytest.mark.parametrize("N", [1, 2])
def test_trace_coefficients_match_finite_differences(N):
    report = g_expansion_trace(SMALL, 1.0, 1.0, XI, 0.5, N, [0.02, 0.04], cache=CACHE)
    assert report.a_0 == pytest.approx(g_kernel(SMALL, 1.0, 1.0, XI, 0.5, CACHE).trace(), rel=1e-12)
    for j, (a_j, fd) in enumerate(zip(report.coefficients, report.fd_check), start=1):
        assert abs(math.factorial(j) * a_j - fd) <= 1e-3 * abs(fd)
    assert report.smallness.satisfied


@pytest.mark.parametrize("N", [1, 2])
def test_trace_remainder_order(N):
    report = g_expansion_trace(SMALL, 1.0, 1.0, XI, 0.5, N, DW, require_slope=True, cache=CACHE)
    assert report.slope == pytest.approx(N + 1, abs=0.3)
    assert len(report.coefficients) == N


def test_trace_expansion_at_zero_fugacity():
    report = g_expansion_trace(SMALL, 1.0, 1.0, XI, 0.0, 2, [0.02], cache=CACHE)
    assert report.a_0 == 0
    assert all(c == 0 for c in report.coefficients)
    assert all(abs(fd) <= 1e-14 for fd in report.fd_check)


def test_trace_expansion_refuses_large_offsets():
    with pytest.raises(DomainError) as info:
        g_expansion_trace(SMALL, 1.0, 1.0, 0.35, 0.9, 1, [-0.9], cache=CACHE)
    assert info.value.details["value"] >= 0.5


# ============================================================================
# TEST 6: Flux moments, volume scaling and export
# ============================================================================

def test_two_factor_traces_carry_no_flux():
    G = heat_kernel_grid(SMALL, 1.0, 1.0, CACHE)
    g = g_kernel(SMALL, 1.0, 1.0, XI, 0.5, CACHE)
    moments = trace_moments([G, g], 2)
    assert abs(moments[1]) <= 1e-12 * abs(moments[0])
    assert abs(moments[2]) <= 1e-12 * abs(moments[0])


def test_flux_moment_semigroup_oracle():
    G = heat_kernel_grid(SMALL, 1.0, 1.0, CACHE)
    expected = np.sum(np.exp(-2.0 * eigen_system(SMALL, 1.0, cache=CACHE).values))
    assert flux_moment([G, G], 0) == pytest.approx(expected, rel=1e-10)


def test_odd_flux_moment_vanishes_without_field():
    G = heat_kernel_grid(SMALL, 1.0, 0.0, CACHE)
    d0 = flux_moment([G, G, G], 0)
    assert abs(flux_moment([G, G, G], 1)) <= 1e-10 * abs(d0)
    assert abs(flux_moment([G, G, G], 2)) > 1e-8 * abs(d0)


@pytest.mark.parametrize("m", [1, 2])
def test_flux_moment_matches_direct_sum(m):
    grid = BoxGrid(L=2.0, n=4)
    G = heat_kernel_grid(grid, 0.5, 1.0, CACHE)
    g = g_kernel(grid, 0.5, 1.0, XI, 0.5, CACHE)
    P = plane_geometry(grid, 0.0).phase
    fl = P[:, :, None] + P[None, :, :] + P.T[:, None, :]
    direct = np.einsum("xab,xa,ab,bx->", (1j * fl) ** m, G.operator, g.operator, G.operator)
    assert flux_moment([G, g, G], m) == pytest.approx(direct, rel=1e-10)


def test_volume_scaling_of_flux_moments():
    grids = [BoxGrid.with_spacing(L, 0.4) for L in (6.0, 8.0, 10.0, 12.0)]
    scaling = flux_moment_scaling(grids, 1.0, 1.0, 0, 1, cache=CACHE)
    assert scaling.obeys_volume_law(0.15)
    assert scaling.exponent == pytest.approx(2.0, abs=0.05)
    # the boundary layer shows up in the plain log-log slope
    assert abs(scaling.raw_slope - 2.0) > abs(scaling.exponent - 2.0)
    assert scaling.fit_residual < 1e-4
    assert scaling.bulk_coefficient.real > 0
    with pytest.raises(InvalidInputError):
        flux_moment_scaling(grids[:3], 1.0, 1.0, 0, 1)
    with pytest.raises(InvalidInputError):
        flux_moment_scaling([*grids[:3], BoxGrid(L=12.0, n=12)], 1.0, 1.0, 0, 1)


def test_volume_scaling_of_trace_g_derivative():
    grids = [BoxGrid.with_spacing(L, 0.5) for L in (6.0, 7.0, 8.0, 9.0)]
    scaling = trace_g_scaling(grids, 1.0, 1.0, XI, 0.5, N=1)
    assert scaling.obeys_volume_law(0.15)
    assert scaling.quantity == "d^1 Tr g"


@pytest.mark.parametrize("power", [1.0, 1.5, 2.5, 3.0, 4.0])
def test_volume_law_rejects_other_growth_rates(power):
    lengths = [6.0, 8.0, 10.0, 12.0]
    scaling = volume_scaling(lengths, [L**power - 0.5 * L ** (power - 1) for L in lengths], 2)
    assert not scaling.obeys_volume_law(0.15)


def test_volume_law_accepts_surface_and_corner_terms():
    lengths = [6.0, 8.0, 10.0, 12.0]
    values = [0.16 * L**2 - 0.6 * L + 0.25 for L in lengths]
    scaling = volume_scaling(lengths, values, 2)
    assert scaling.exponent == pytest.approx(2.0, abs=1e-9)
    assert scaling.bulk_coefficient == pytest.approx(0.16)
    assert scaling.fit_residual < 1e-12
    assert scaling.raw_slope > 2.15
    with pytest.raises(InvalidInputError):
        volume_scaling(lengths[:3], values[:3], 2)


def test_volume_law_with_pure_surface_growth_has_no_exponent():
    lengths = [6.0, 8.0, 10.0, 12.0]
    scaling = volume_scaling(lengths, [3.0 * L for L in lengths], 2)
    assert scaling.exponent is None
    assert not scaling.obeys_volume_law()


def test_report_slope_needs_support():
    with pytest.raises(ValidationError):
        ExpansionReport(
            kind="semigroup", order=1, beta=1.0, omega0=1.0, grid="L=3,n=8,dim=2",
            remainder_samples=[(0.02, 4e-4), (0.04, 1.6e-3), (0.08, 6.4e-3)], slope=2.0,
        )
    # four samples but only a factor 8 in delta omega
    with pytest.raises(ValidationError):
        ExpansionReport(
            kind="semigroup", order=1, beta=1.0, omega0=1.0, grid="L=3,n=8,dim=2",
            remainder_samples=[(dw, dw**2) for dw in (0.01, 0.02, 0.04, 0.08)], slope=2.0,
        )
    assert not slope_supported([0.02, 0.04, 0.08, 0.16])
    assert slope_supported(DW)
    report = ExpansionReport(
        kind="semigroup", order=1, beta=1.0, omega0=1.0, grid="L=3,n=8,dim=2",
        remainder_samples=[(dw, dw**2) for dw in DW], slope=2.0,
    )
    assert report.slope == 2.0


def test_report_repository_round_trip(tmp_path):
    report = ExpansionReport(
        kind="g_trace", order=2, beta=1.0, omega0=1.0, grid="L=3,n=8,dim=2",
        a_0=complex(0.31, -0.02), coefficients=[complex(-0.125, 1e-3), complex(0.5, 0.0)],
        remainder_samples=[(0.02, 1.5e-7), (0.04, 1.2e-6)], fd_check=[complex(-0.125, 1e-3)],
        xi=XI, z=0.5,
    )
    repo = ReportRepository(tmp_path)
    repo.save(report, "trace")
    assert repo.load("trace") == report

"""
Finite-Volume Gas Test Suite
1. Eigenvalue-sum pressure
2. Contour construction, resolvent estimate and contour pressure
3. Susceptibilities (eig_fd, contour_fd, hellmann) and z -> 0 oracle
4. Bounds, analyticity and CSV export
"""
import math
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from bulk.app.models import ThermoParams
from common_lib.cache import EigenCache
from common_lib.errors import (
    ContourInfeasibleError,
    DomainError,
    InvalidInputError,
    UnsupportedMethodError,
)
from finite_gas.app.models import Contour, FugacityCompact, SusceptibilityRecord
from finite_gas.app.repository import SusceptibilityRepository
from finite_gas.app.service import (
    build_contour,
    cauchy_riemann_residual,
    eigsum_summary,
    one_particle_boltzmann_derivative,
    pressure_contour,
    pressure_eigsum,
    resolvent_sup_estimate,
    susceptibility_finite,
    trace_norm_bound_check,
)
from special_fn.app.models import Statistics
from spectrum.app.models import BoxGrid, Spectrum
from spectrum.app.service import SpectrumProvider

GRID = BoxGrid(L=8.0, n=12, dim=3)


@pytest.fixture(scope="module")
def provider():
    return SpectrumProvider(GRID, n3max=12, cache=EigenCache())


@pytest.fixture(scope="module")
def full_spectrum(provider):
    return provider.spectrum(1.0)


def _disc(radius=0.5, eps="bose"):
    return FugacityCompact.disc(radius, 16, beta=1.0, omega=1.0, eps=eps)


# ============================================================================
# TEST 1: Eigenvalue-sum pressure
# ============================================================================

def test_zero_fugacity_pressure(full_spectrum):
    assert pressure_eigsum(full_spectrum, ThermoParams(beta=1.0, omega=1.0, z=0.0)) == 0


def test_single_level_fermi():
    toy = Spectrum.from_levels([0.7], GRID, omega=1.0)
    p = ThermoParams(beta=2.0, omega=1.0, eps="fermi", z=0.4)
    expected = math.log(1 + 0.4 * math.exp(-1.4)) / (2.0 * GRID.volume)
    assert pressure_eigsum(toy, p) == pytest.approx(expected, rel=1e-14)


def test_conditioning_is_reported():
    toy = Spectrum.from_levels([0.0, 1.0], GRID, omega=1.0)
    summary = eigsum_summary(toy, ThermoParams(beta=1.0, omega=1.0, z=0.9))
    assert summary.conditioning == pytest.approx(0.1)
    assert summary.levels == 2


def test_branch_cut_collision_is_rejected():
    toy = Spectrum.from_levels([0.0], GRID, omega=1.0)
    with pytest.raises(DomainError):
        pressure_eigsum(toy, ThermoParams(beta=1.0, omega=1.0, z=1.0))


# ============================================================================
# TEST 2: Contours
# ============================================================================

def test_contour_for_half_disc():
    toy = Spectrum.from_levels([0.5, 1.5], GRID, omega=1.0)
    contour = build_contour(_disc(), 1.0, 1.0, toy, 128)
    assert 0.5 * math.exp(-0.5) < contour.radius < 0.99
    assert contour.radius == pytest.approx(0.65, abs=0.01)
    assert contour.winding_number(0j) == pytest.approx(1.0, abs=1e-12)
    assert contour.winding_number(1.0) == pytest.approx(0.0, abs=1e-12)
    assert not contour.encloses(1.0)


def test_contour_infeasible_near_branch_point():
    toy = Spectrum.from_levels([0.1], GRID, omega=1.0)
    K = FugacityCompact.disc(1.5, 8, beta=1.0, omega=1.0)
    with pytest.raises(ContourInfeasibleError) as info:
        build_contour(K, 1.0, 1.0, toy, 64)
    assert info.value.details["required_radius"] > 1.0


def test_compact_domain_check():
    K = FugacityCompact.from_values([0.2, math.exp(0.5) + 1e-6], beta=1.0, omega=1.0)
    with pytest.raises(DomainError):
        K.check_domain()
    assert len(_disc().samples) == 33


def test_resolvent_estimate_examples():
    toy = Spectrum.from_levels([math.log(2.0)], GRID, omega=1.0)
    contour = Contour.circle(0.65, 128, Statistics.BOSE)
    at_origin = FugacityCompact.from_values([0.0], beta=1.0, omega=1.0)
    assert resolvent_sup_estimate(toy, at_origin, contour) == pytest.approx(1 / 0.65)
    K = FugacityCompact.from_values([0.5], beta=1.0, omega=1.0)
    assert resolvent_sup_estimate(toy, K, contour) == pytest.approx(2.5, rel=1e-12)


def test_resolvent_estimate_stable_under_refinement(full_spectrum):
    K = _disc()
    coarse = build_contour(K, 1.0, 1.0, full_spectrum, 64)
    fine = coarse.refined(4)
    first = resolvent_sup_estimate(full_spectrum, K, coarse)
    second = resolvent_sup_estimate(full_spectrum, K, fine)
    assert abs(first - second) <= 0.01 * second


@pytest.mark.parametrize("eps", ["bose", "fermi"])
def test_contour_matches_eigensum(full_spectrum, eps):
    p = ThermoParams(beta=1.0, omega=1.0, eps=eps, z=0.5)
    K = FugacityCompact.from_values([p.z], beta=1.0, omega=1.0, eps=eps)
    contour = build_contour(K, 1.0, 1.0, full_spectrum)
    direct = pressure_eigsum(full_spectrum, p)
    assert abs(pressure_contour(full_spectrum, p, contour) - direct) <= 1e-8 * abs(direct)


def test_contour_refinement_and_radius_independence(full_spectrum):
    p = ThermoParams(beta=1.0, omega=1.0, eps="fermi", z=0.3 + 0.2j)
    K = FugacityCompact.from_values([p.z], beta=1.0, omega=1.0, eps="fermi")
    contour = build_contour(K, 1.0, 1.0, full_spectrum, 128)
    value = pressure_contour(full_spectrum, p, contour)
    assert abs(pressure_contour(full_spectrum, p, contour.refined()) - value) < 1e-10
    other = build_contour(K, 1.0, 1.0, full_spectrum, 256, radius=0.8)
    assert abs(pressure_contour(full_spectrum, p, other) - value) < 1e-10


def test_contour_with_trace_callable(full_spectrum):
    p = ThermoParams(beta=1.0, omega=1.0, z=0.5)
    K = FugacityCompact.from_values([p.z], beta=1.0, omega=1.0)
    contour = build_contour(K, 1.0, 1.0, full_spectrum)
    zw = p.z * full_spectrum.boltzmann_weights(1.0)

    def trace(xi):
        return np.sum(zw / (xi - zw))

    via_callable = pressure_contour(trace, p, contour, volume=full_spectrum.volume)
    assert via_callable == pytest.approx(pressure_contour(full_spectrum, p, contour), rel=1e-13)
    with pytest.raises(InvalidInputError):
        pressure_contour(trace, p, contour)


def test_contour_zero_fugacity_and_enclosure(full_spectrum):
    contour = Contour.circle(0.1, 64, Statistics.BOSE)
    assert pressure_contour(full_spectrum, ThermoParams(beta=1.0, omega=1.0, z=0.0), contour) == 0
    with pytest.raises(ContourInfeasibleError):
        pressure_contour(full_spectrum, ThermoParams(beta=1.0, omega=1.0, z=0.5), contour)


# ============================================================================
# TEST 3: Susceptibilities
# ============================================================================

def test_hellmann_matches_eig_fd(provider):
    p = ThermoParams(beta=1.0, omega=1.0, eps="fermi", z=0.5)
    hellmann = susceptibility_finite(provider, p, 1, "hellmann")
    fd = susceptibility_finite(provider, p, 1, "eig_fd")
    assert abs(hellmann.value - fd.value) <= 1e-4 * abs(fd.value)
    assert fd.step is not None


@pytest.mark.parametrize("N", [1, 2])
def test_eig_fd_matches_contour_fd(provider, N):
    p = ThermoParams(beta=1.0, omega=1.0, eps="fermi", z=0.5)
    eig = susceptibility_finite(provider, p, N, "eig_fd")
    contour = susceptibility_finite(provider, p, N, "contour_fd")
    assert abs(eig.value - contour.value) <= 1e-6 * abs(eig.value)


def test_small_fugacity_limit(provider):
    z = 1e-6
    p = ThermoParams(beta=1.0, omega=1.0, z=z)
    for N in (1, 2):
        chi = susceptibility_finite(provider, p, N, "eig_fd", step=0.02).value
        oracle = one_particle_boltzmann_derivative(provider, p, N, step=0.02)
        assert abs(chi / z - oracle) <= 1e-4 * abs(oracle)


def test_susceptibility_validation(provider):
    p = ThermoParams(beta=1.0, omega=1.0, z=0.5)
    with pytest.raises(UnsupportedMethodError):
        susceptibility_finite(provider, p, 2, "hellmann")
    with pytest.raises(InvalidInputError):
        susceptibility_finite(provider, p, 0)
    with pytest.raises(InvalidInputError):
        susceptibility_finite(provider, p, 1, "spline")
    with pytest.raises(DomainError):
        susceptibility_finite(provider, p.with_omega(0.0), 1)


# ============================================================================
# TEST 4: Bounds, analyticity and export
# ============================================================================

def test_trace_norm_bound(full_spectrum):
    K = _disc()
    contour = build_contour(K, 1.0, 1.0, full_spectrum)
    check = trace_norm_bound_check(full_spectrum, K, contour)
    assert check.max_trace_norm <= check.bound
    assert check.boltzmann_sum <= 1.05 * check.gibbs_bound


@pytest.mark.slow
def test_gibbs_bound_at_fine_grid():
    fine = SpectrumProvider(BoxGrid(L=8.0, n=32, dim=3), n3max=32, cache=EigenCache())
    spec = fine.spectrum(1.0)
    K = _disc()
    check = trace_norm_bound_check(spec, K, build_contour(K, 1.0, 1.0, spec))
    assert check.passed
    assert check.discretization_factor <= 1.05


def test_cauchy_riemann(full_spectrum):
    p = ThermoParams(beta=1.0, omega=1.0, eps="bose", z=0.4 + 0.1j)
    check = cauchy_riemann_residual(full_spectrum, p)
    assert check.residual <= 1e-8
    assert check.derivative.real > 0


def test_repository_round_trip(tmp_path):
    p = ThermoParams(beta=1.0, omega=1.0, eps="fermi", z=0.5 - 0.25j)
    record = SusceptibilityRecord(
        L=8.0, beta=p.beta, omega=p.omega, z=p.z, N=2, chi=complex(-1.25e-3, 3.0e-19), method="eig_fd",
        error_estimate=4.2e-11,
    )
    repo = SusceptibilityRepository(tmp_path)
    path = repo.save([record], "chi")
    assert path.read_text().splitlines()[0] == "L,beta,omega,re_z,im_z,N,chi,method,error_estimate"
    assert repo.load("chi") == [record]

"""
Bulk (Thermodynamic Limit) Test Suite
1. Landau-level pressure and its tail bound
2. Free-gas limit
3. Analytic vs finite-difference susceptibilities
"""
import math
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from bulk.app.models import ThermoParams
from bulk.app.service import (
    free_gas_pressure,
    landau_tail_bound,
    magnetization_bulk,
    pressure_bulk,
    pressure_z_derivative,
    susceptibility_bulk,
    thermal_prefactor,
)
from common_lib.errors import DomainError, InvalidInputError
from special_fn.app.models import Statistics
from special_fn.app.service import f_series


def _brute_force_pressure(p: ThermoParams, levels: int) -> float:
    total = sum(
        f_series(1.5, p.z * math.exp(-(k + 0.5) * p.beta * p.omega), p.eps).value for k in range(levels)
    )
    return (p.omega * thermal_prefactor(p.beta) * total).real


# ============================================================================
# TEST 1: Pressure and tail bound
# ============================================================================

def test_pressure_vanishes_at_zero_fugacity():
    result = pressure_bulk(ThermoParams(beta=1.0, omega=1.0, z=0.0))
    assert result.value == 0
    assert result.levels == 0


def test_pressure_matches_brute_force_sum():
    p = ThermoParams(beta=1.0, omega=1.0, eps="bose", z=0.5)
    result = pressure_bulk(p)
    assert abs(result.value.real - _brute_force_pressure(p, 200)) < 1e-12
    assert result.value.real > 0
    assert abs(result.value.imag) < 1e-15


def test_tail_bound_vanishes_and_decreases():
    assert landau_tail_bound(ThermoParams(beta=1.0, omega=1.0, z=0.0), 5) == 0.0
    p = ThermoParams(beta=1.0, omega=1.0, z=0.5)
    bounds = [landau_tail_bound(p, k) for k in range(0, 60, 5)]
    assert all(b > a for a, b in zip(bounds[1:], bounds[:-1]))


def test_tail_bound_dominates_true_tail():
    p = ThermoParams(beta=1.0, omega=1.0, z=0.5)
    tail = _brute_force_pressure(p, 500) - _brute_force_pressure(p, 40)
    assert landau_tail_bound(p, 40) >= abs(tail)


def test_tail_bound_domain_error():
    p = ThermoParams(beta=1.0, omega=1.0, z=2.0, eps="fermi")
    with pytest.raises(DomainError):
        landau_tail_bound(p, 0)


def test_doubling_levels_stays_within_bound():
    p = ThermoParams(beta=1.0, omega=0.5, eps="fermi", z=0.8 + 0.3j)
    coarse = pressure_bulk(p, levels=30)
    fine = pressure_bulk(p, levels=60)
    assert abs(fine.value - coarse.value) <= coarse.tail_bound


def test_pressure_rejects_cut_and_zero_field():
    with pytest.raises(DomainError):
        pressure_bulk(ThermoParams(beta=1.0, omega=1.0, z=math.exp(0.5)))
    with pytest.raises(DomainError):
        pressure_bulk(ThermoParams(beta=1.0, omega=0.0, z=0.5))


def test_pressure_beyond_unit_fugacity_inside_domain():
    p = ThermoParams(beta=1.0, omega=1.0, eps="bose", z=1.4)
    result = pressure_bulk(p)
    assert result.value.real > pressure_bulk(p.with_z(1.0)).value.real


# ============================================================================
# TEST 2: Free-gas limit and analyticity in z
# ============================================================================

@pytest.mark.parametrize("eps", [Statistics.BOSE, Statistics.FERMI])
def test_weak_field_limit_matches_free_gas(eps):
    p = ThermoParams(beta=1.0, omega=1e-3, eps=eps, z=0.5)
    bulk = pressure_bulk(p).value
    free = free_gas_pressure(1.0, 0.5, eps)
    assert abs(bulk - free) <= 1e-5 * abs(free)


def test_z_derivative_matches_finite_difference():
    p = ThermoParams(beta=1.0, omega=1.0, eps="fermi", z=0.4 + 0.2j)
    h = 1e-5
    fd = (pressure_bulk(p.with_z(p.z + h)).value - pressure_bulk(p.with_z(p.z - h)).value) / (2 * h)
    fd_imag = (pressure_bulk(p.with_z(p.z + 1j * h)).value - pressure_bulk(p.with_z(p.z - 1j * h)).value) / (2j * h)
    exact = pressure_z_derivative(p)
    assert abs(exact - fd) < 1e-8
    # Cauchy-Riemann: derivative is direction independent
    assert abs(exact - fd_imag) < 1e-8


def test_z_derivative_at_origin():
    p = ThermoParams(beta=1.0, omega=1.0, z=0.0)
    expected = thermal_prefactor(1.0) * math.exp(-0.5) / (1 - math.exp(-1.0))
    assert pressure_z_derivative(p).real == pytest.approx(expected, rel=1e-13)


# ============================================================================
# TEST 3: Susceptibilities
# ============================================================================

def test_order_zero_is_pressure():
    p = ThermoParams(beta=1.0, omega=1.0, z=0.5)
    assert susceptibility_bulk(p, 0).value == pressure_bulk(p).value


@pytest.mark.parametrize("N,tol", [(1, 1e-6), (2, 1e-4)])
def test_analytic_and_finite_difference_agree(N, tol):
    p = ThermoParams(beta=1.0, omega=1.0, eps="bose", z=0.5)
    analytic = susceptibility_bulk(p, N, "analytic")
    fd = susceptibility_bulk(p, N, "finite_diff")
    assert abs(analytic.value - fd.value) <= tol * abs(analytic.value)
    assert fd.step == pytest.approx(1e-2)


def test_fermi_complex_fugacity_third_order():
    p = ThermoParams(beta=1.0, omega=1.0, eps="fermi", z=0.7 - 0.4j)
    analytic = susceptibility_bulk(p, 3, "analytic")
    fd = susceptibility_bulk(p, 3, "finite_diff")
    assert abs(analytic.value - fd.value) <= 1e-4 * abs(analytic.value)


def test_magnetization_is_first_order():
    p = ThermoParams(beta=2.0, omega=0.5, z=0.3)
    assert magnetization_bulk(p).value == susceptibility_bulk(p, 1).value


def test_order_and_method_validation():
    p = ThermoParams(beta=1.0, omega=1.0, z=0.5)
    with pytest.raises(InvalidInputError):
        susceptibility_bulk(p, 5)
    with pytest.raises(InvalidInputError):
        susceptibility_bulk(p, 1, "hellmann")


def test_thermo_params_are_validated():
    with pytest.raises(ValueError):
        ThermoParams(beta=0.0)
    assert ThermoParams(beta=1.0, eps="fermi").eps is Statistics.FERMI
    assert np.isclose(ThermoParams(beta=2.0, omega=1.0).cut_start, math.e)

"""
Common Library Test Suite
1. Error hierarchy
2. Finite differences, Richardson and quadrature
3. Eigen cache
4. Settings, logging and retry helpers
"""
import json
import logging
import math
import os
import sys
import threading
import unittest

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.linalg import LinAlgError

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from common_lib.cache import EigenCache, cache_key
from common_lib.config import Settings
from common_lib.errors import (
    CheckFailure,
    ConfigError,
    ContourInfeasibleError,
    DomainError,
    InvalidInputError,
    NumericalError,
    UnsupportedMethodError,
)
from common_lib.numerics import (
    central_difference_weights,
    composite_gauss,
    divided_differences,
    fit_loglog,
    gauss_legendre,
    graded_unit_panels,
    richardson_derivative,
    richardson_extrapolate,
    stencil_error_order,
    sweep_derivative,
)
from common_lib.observability import CustomJsonFormatter, run_id_ctx, task_ctx
from common_lib.retry_config import NonFiniteResult, _is_retryable_exception, ensure_finite, get_eigensolver_retrying


# ============================================================================
# TEST 1: Errors
# ============================================================================

class ErrorHierarchyTests(unittest.TestCase):
    def test_codes(self):
        cases = [
            (InvalidInputError("N", "negative"), "INVALID_INPUT", 400, 2),
            (ConfigError("study.toml", "bad"), "CONFIG_ERROR", 400, 2),
            (DomainError("z", "on the cut"), "DOMAIN_ERROR", 422, 2),
            (ContourInfeasibleError("too close"), "CONTOUR_INFEASIBLE", 422, 3),
            (NumericalError("f_integral", "no convergence"), "NUMERICAL_ERROR", 500, 3),
            (UnsupportedMethodError("hellmann", "N = 1 only"), "UNSUPPORTED_METHOD", 400, 2),
            (CheckFailure("semigroup", {"defect": 1.0}), "CHECK_FAILED", 200, 1),
        ]
        for exc, code, status, exit_code in cases:
            with self.subTest(code=code):
                self.assertEqual(exc.error_code, code)
                self.assertEqual(exc.status_code, status)
                self.assertEqual(exc.exit_code, exit_code)
                self.assertEqual(exc.to_dict()["error"]["code"], code)

    def test_details_carried_into_dict(self):
        exc = DomainError("zeta", "within margin", {"distance": 1e-4})
        self.assertEqual(exc.to_dict()["error"]["details"], {"distance": 1e-4})
        self.assertIn("zeta", str(exc))


# ============================================================================
# TEST 2: Numerics
# ============================================================================

def test_central_difference_weights():
    offsets, weights = central_difference_weights(1, 3)
    assert offsets == (-1, 0, 1)
    assert weights == pytest.approx((-0.5, 0.0, 0.5))
    _, weights = central_difference_weights(2, 3)
    assert weights == pytest.approx((1.0, -2.0, 1.0))
    assert stencil_error_order(1, 3) == 2
    with pytest.raises(ValueError):
        central_difference_weights(2, 4)


def test_richardson_extrapolate_removes_listed_powers():
    values = [1.0 + 0.3 * h**2 + 0.1 * h**4 for h in (0.4, 0.2, 0.1)]
    result = richardson_extrapolate(values, [2, 4])
    assert abs(result.value - 1.0) < 1e-13
    with pytest.raises(ValueError):
        richardson_extrapolate([1.0], [2])


@pytest.mark.parametrize("order", [1, 2, 3])
def test_richardson_derivative_of_exponential(order):
    fd = richardson_derivative(lambda x: math.exp(2.0 * x), 0.3, order, 0.1)
    exact = 2.0**order * math.exp(0.6)
    assert abs(fd.value - exact) < 1e-7 * exact
    assert fd.error < 1e-5 * exact


def test_sweep_picks_smallest_discrepancy():
    fd = sweep_derivative(math.sin, 0.5, 1, [0.8, 0.1])
    assert fd.step == 0.1
    assert fd.value == pytest.approx(math.cos(0.5), rel=1e-10)


def test_gauss_rules():
    nodes, weights = gauss_legendre(5)
    assert np.sum(weights * nodes**8) == pytest.approx(2.0 / 9.0, rel=1e-14)
    assert not nodes.flags.writeable
    panels = graded_unit_panels(3, 4.0)
    assert panels == pytest.approx([0.0, 1 / 64, 1 / 16, 1 / 4, 3 / 4, 15 / 16, 63 / 64, 1.0])
    x, w = composite_gauss(panels, 8)
    assert np.sum(w * np.sqrt(x)) == pytest.approx(2.0 / 3.0, rel=1e-6)


def test_divided_differences_isolate_leading_coefficient():
    x = [1.0, 2.0, 4.0, 5.0]
    dd = divided_differences(x, [3.0 * t**2 - t + 7.0 for t in x], 2)
    assert list(dd) == pytest.approx([3.0, 3.0])
    assert list(divided_differences(x, [t**3 for t in x], 3)) == pytest.approx([1.0])
    with pytest.raises(ValueError):
        divided_differences([1.0, 1.0, 2.0], [0.0, 1.0, 2.0], 1)
    with pytest.raises(ValueError):
        divided_differences(x[:2], [0.0, 1.0], 2)


def test_fit_loglog_recovers_power_law():
    x = np.array([0.02, 0.04, 0.08, 0.16])
    fit = fit_loglog(x, 3.0 * x**2)
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.samples == 4
    with pytest.raises(ValueError):
        fit_loglog([1.0, 2.0], [0.0, 1.0])


# ============================================================================
# TEST 3: Eigen cache
# ============================================================================

def test_cache_key_rounds_floats():
    assert cache_key("eig", 3.0, 8, 2, 0.1 + 0.2) == cache_key("eig", 3.0, 8, 2, 0.3)


def test_cache_computes_once_under_concurrency():
    cache = EigenCache(max_entries=4)
    calls = []
    barrier = threading.Barrier(6)

    def factory():
        calls.append(1)
        return np.arange(3)

    def worker():
        barrier.wait()
        cache.get_or_compute(("k",), factory)

    threads = [threading.Thread(target=worker) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(calls) == 1
    assert cache.stats() == {"entries": 1, "hits": 5, "misses": 1}


def test_cache_eviction_and_freeze():
    cache = EigenCache(max_entries=2)
    for key in ("a", "b", "c"):
        cache.get_or_compute((key,), lambda key=key: key)
    assert len(cache) == 2
    cache.freeze()
    assert cache.get_or_compute(("c",), lambda: "never") == "c"
    with pytest.raises(KeyError):
        cache.get_or_compute(("a",), lambda: "a")
    cache.clear()
    assert not cache.frozen


# ============================================================================
# TEST 4: Settings, logging, retry
# ============================================================================

def test_settings_read_prefixed_environment(monkeypatch):
    monkeypatch.setenv("MG_CONTOUR_NODES", "64")
    monkeypatch.setenv("MG_EIGEN_DRIVERS", "evd, ev")
    settings = Settings(_env_file=None)
    assert settings.contour_nodes == 64
    assert settings.driver_list == ["evd", "ev"]


def test_settings_reject_unknown_log_format(monkeypatch):
    monkeypatch.setenv("MG_LOG_FORMAT", "xml")
    with pytest.raises(ValidationError):
        Settings(_env_file=None)


def test_json_formatter_injects_run_and_task():
    record = logging.LogRecord("lab", logging.INFO, __file__, 1, "step %d", (3,), None)
    run_token, task_token = run_id_ctx.set("run-7"), task_ctx.set("converge:L=8")
    try:
        payload = json.loads(CustomJsonFormatter("%(message)s").format(record))
    finally:
        run_id_ctx.reset(run_token)
        task_ctx.reset(task_token)
    assert payload["message"] == "step 3"
    assert payload["run_id"] == "run-7"
    assert payload["task"] == "converge:L=8"
    assert payload["level"] == "INFO"
    assert "timestamp" in payload


def test_retry_helpers():
    assert _is_retryable_exception(LinAlgError("x"))
    assert _is_retryable_exception(NonFiniteResult("nan"))
    assert not _is_retryable_exception(ValueError("x"))
    ensure_finite(np.ones(3))
    with pytest.raises(NonFiniteResult):
        ensure_finite(np.array([1.0, np.nan]))

    drivers = []
    for attempt in get_eigensolver_retrying(["evr", "evd", "ev"]):
        with attempt:
            drivers.append(attempt.retry_state.attempt_number)
            if len(drivers) < 3:
                raise LinAlgError("driver failed")
    assert drivers == [1, 2, 3]


if __name__ == "__main__":
    unittest.main()

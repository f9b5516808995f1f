"""
QueryAPI Test Suite
1. Health and request ID propagation
2. Pressure and susceptibility endpoints
3. Error mapping
4. Verify endpoint
"""
import os
import sys

import pytest
from fastapi.testclient import TestClient

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from bulk.app.models import ThermoParams
from bulk.app.service import pressure_bulk
from query_api.app.main import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app, raise_server_exceptions=False)


# ============================================================================
# TEST 1: Health
# ============================================================================

def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"
    assert response.headers["X-Request-ID"]


def test_request_id_is_echoed(client):
    response = client.get("/health", headers={"X-Request-ID": "abc123"})
    assert response.headers["X-Request-ID"] == "abc123"


# ============================================================================
# TEST 2: Pressure and chi
# ============================================================================

def test_bulk_pressure_matches_service(client):
    response = client.post("/api/v1/pressure", json={"source": "bulk", "z": [0.5, "0.3j"]})
    assert response.status_code == 200
    body = response.json()
    assert body["source"] == "bulk"
    assert len(body["rows"]) == 2
    expected = pressure_bulk(ThermoParams(beta=1.0, omega=1.0, z=0.5)).value
    assert complex(body["rows"][0]["P"]) == pytest.approx(expected, rel=1e-14)
    assert body["rows"][0]["method"] == "landau_sum"


def test_finite_pressure_routes_agree(client):
    request = {"source": "finite", "L": 4.0, "n": 6, "z": [0.4, [0.1, 0.2]]}
    eigsum = client.post("/api/v1/pressure", json={**request, "method": "eigsum"}).json()
    contour = client.post("/api/v1/pressure", json={**request, "method": "contour"}).json()
    assert eigsum["L"] == 4.0
    for a, b in zip(eigsum["rows"], contour["rows"]):
        assert complex(b["P"]) == pytest.approx(complex(a["P"]), rel=1e-8)


def test_bulk_chi_orders(client):
    response = client.post("/api/v1/chi", json={"source": "bulk", "z": [0.5], "orders": [0, 1, 2]})
    assert response.status_code == 200
    records = response.json()["records"]
    assert [r["N"] for r in records] == [0, 1, 2]
    assert all(r["method"] == "analytic" for r in records)


def test_finite_chi(client):
    response = client.post(
        "/api/v1/chi", json={"source": "finite", "L": 4.0, "n": 6, "z": [0.3], "orders": [1], "method": "eig_fd"}
    )
    assert response.status_code == 200
    record = response.json()["records"][0]
    assert record["L"] == 4.0
    assert record["method"] == "eig_fd"


# ============================================================================
# TEST 3: Errors
# ============================================================================

def test_domain_error_maps_to_422(client):
    response = client.post("/api/v1/pressure", json={"source": "bulk", "z": [5.0]})
    assert response.status_code == 422
    assert response.json()["error"]["code"] == "DOMAIN_ERROR"


def test_unsupported_method_maps_to_400(client):
    response = client.post(
        "/api/v1/chi", json={"source": "finite", "L": 4.0, "n": 6, "z": [0.3], "orders": [2], "method": "hellmann"}
    )
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "UNSUPPORTED_METHOD"


def test_malformed_request_is_rejected(client):
    response = client.post("/api/v1/pressure", json={"source": "bulk", "z": ["not-a-number"]})
    assert response.status_code == 422
    response = client.post("/api/v1/pressure", json={"source": "nowhere"})
    assert response.status_code == 422


# ============================================================================
# TEST 4: Verify
# ============================================================================

def test_verify_named_checks(client):
    response = client.post("/api/v1/verify", json={"checks": ["flux-bound"], "seed": 5})
    assert response.status_code == 200
    body = response.json()
    assert body["seed"] == 5
    assert body["checks"][0]["name"] == "flux-bound"
    assert body["checks"][0]["passed"] is True


def test_verify_unknown_check(client):
    response = client.post("/api/v1/verify", json={"checks": ["nope"]})
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "INVALID_INPUT"

"""
CLI Test Suite
1. Exit codes
2. Output files
"""
import json
import os
import sys

import pytest

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

import main as cli
from common_lib.logger import setup_logging


@pytest.fixture(autouse=True)
def restore_logging():
    yield
    setup_logging(force=True)


# ============================================================================
# TEST 1: Exit codes
# ============================================================================

def test_empty_verify_succeeds(capsys):
    assert cli.main(["verify"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["checks"] == []


def test_unknown_check_is_input_error(capsys):
    assert cli.main(["verify", "no-such-check"]) == 2
    assert "INVALID_INPUT" in capsys.readouterr().err


def test_missing_config_is_config_error(tmp_path):
    assert cli.main(["--config", str(tmp_path / "missing.toml"), "converge"]) == 2


def test_fugacity_on_the_cut_is_domain_error(capsys):
    assert cli.main(["pressure", "--z", "5.0"]) == 2
    assert "DOMAIN_ERROR" in capsys.readouterr().err


def test_malformed_fugacity_is_input_error():
    assert cli.main(["pressure", "--z", "abc"]) == 2


def test_failed_study_exits_with_one(tmp_path, capsys):
    config = tmp_path / "study.toml"
    config.write_text("lengths = [3.0, 4.0]\nspacing = 0.5\nfugacities = [0.3]\norders = [1]\nratio_tolerance = 1.0000001\n")
    code = cli.main(["--config", str(config), "bounds"])
    payload = json.loads(capsys.readouterr().out)
    assert payload["kind"] == "bounds"
    assert payload["criteria"]["bounded[omega=1,N=1]"] is False
    assert code == 1


# ============================================================================
# TEST 2: Output
# ============================================================================

def test_bulk_pressure_table(capsys):
    assert cli.main(["pressure", "--z", "0.5", "0.2j"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["source"] == "bulk"
    assert len(payload["rows"]) == 2


def test_chi_csv_written(tmp_path):
    assert cli.main(["--out", str(tmp_path), "chi", "--z", "0.5", "--N", "1", "2"]) == 0
    rows = (tmp_path / "chi_bulk.csv").read_text(encoding="utf-8").splitlines()
    assert rows[0].startswith("L,beta,omega")
    assert len(rows) == 3


def test_verify_report_written(tmp_path):
    assert cli.main(["--out", str(tmp_path), "--format", "json", "verify", "flux-bound"]) == 0
    report = json.loads((tmp_path / "verify.json").read_text(encoding="utf-8"))
    assert report["checks"][0]["name"] == "flux-bound"


def test_config_doc_written(tmp_path):
    assert cli.main(["--out", str(tmp_path), "config-doc"]) == 0
    assert "MG_CONTOUR_NODES" in (tmp_path / "CONFIG_REFERENCE.md").read_text(encoding="utf-8")


def test_kernel_reports_written(tmp_path):
    args = ["--out", str(tmp_path), "kernels", "--L", "3", "--n", "8", "--N", "1", "--kind", "semigroup"]
    assert cli.main(args) == 0
    assert (tmp_path / "semigroup_N1.json").exists()

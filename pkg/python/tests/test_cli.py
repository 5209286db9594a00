"""
Tests for the jacobichain command line: build, evolve, pst-scan and exit codes.
"""
import csv
import io
import json
import math

import pytest

from app.services import dynamics


def _rows(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


# ── build ─────────────────────────────────────────────────────────────────────

def test_build_krawtchouk(run_cli):
    """N=2, p=1/2 serializes h = [1, 1, 1] and J = [1/sqrt(2)] * 2."""
    code, out, _ = run_cli("build", "--family", "krawtchouk", "--N", "2", "--p", "0.5")
    assert code == 0
    record = json.loads(out)
    assert record["kind"] == "krawtchouk" and record["N"] == 2 and record["sign"] == "minus"
    assert record["h"] == pytest.approx([1.0, 1.0, 1.0])
    assert record["J"] == pytest.approx([math.sqrt(0.5)] * 2)


def test_build_dualhahn(run_cli):
    """N=1, gamma=delta=1/2: h = [1.5, 1.5], J = [1.5]."""
    code, out, _ = run_cli("build", "--family", "dualhahn", "--N", "1", "--gamma", "0.5", "--delta", "0.5")
    assert code == 0
    record = json.loads(out)
    assert record["h"] == pytest.approx([1.5, 1.5])
    assert record["J"] == pytest.approx([1.5])


def test_build_invalid_parameter(run_cli):
    """p = 1.5 exits 2 and names the violated constraint."""
    code, out, err = run_cli("build", "--family", "krawtchouk", "--N", "2", "--p", "1.5")
    assert code == 2
    assert out == ""
    assert "0 < p < 1" in err


def test_build_missing_parameter(run_cli):
    """A Hahn spec without beta is invalid input."""
    code, _, err = run_cli("build", "--family", "hahn", "--N", "3", "--alpha", "1")
    assert code == 2
    assert "beta" in err


def test_build_writes_output_file(run_cli, tmp_path):
    """--output writes the record to a file instead of stdout."""
    target = tmp_path / "chain.json"
    code, out, _ = run_cli(
        "build", "--family", "hahn", "--N", "3", "--alpha", "1", "--beta", "2", "--output", str(target)
    )
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["kind"] == "hahn"


# ── evolve ────────────────────────────────────────────────────────────────────

def test_evolve_csv_header_and_transfer(run_cli):
    """All routes give |f_{4,0}(pi)| = 1 for Krawtchouk N=4, p=1/2."""
    code, out, err = run_cli(
        "evolve", "--family", "krawtchouk", "--N", "4", "--p", "0.5",
        "--s", "0", "--times", "0,3.141592653589793", "--method", "all",
    )
    assert code == 0
    assert out.splitlines()[0] == "t,r,s,re_f,im_f,abs_f,method"
    rows = _rows(out)
    assert len(rows) == 2 * 5 * 3
    at_pi = [row for row in rows if row["r"] == "4" and float(row["t"]) > 3]
    assert sorted(row["method"] for row in at_pi) == ["closed", "oracle", "spectral"]
    for row in at_pi:
        assert float(row["abs_f"]) == pytest.approx(1.0, abs=1e-9)
    assert "max discrepancy" in err


def test_evolve_row_order_and_origin(run_cli):
    """Rows run t, then r, then method; the t = 0 closed row is exactly e_s."""
    code, out, _ = run_cli(
        "evolve", "--family", "krawtchouk", "--N", "2", "--p", "0.5", "--times", "0,1", "--method", "all"
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[1].endswith(",spectral") and lines[2].endswith(",closed") and lines[3].endswith(",oracle")
    assert lines[2] == "0,0,0,1,0,1,closed"
    assert [row["t"] for row in _rows(out)] == ["0"] * 9 + ["1"] * 9


def test_evolve_hahn_end_to_end_json(run_cli):
    """Hahn alpha=beta=1: |f_{N,0}(pi)| matches the symmetric closed form."""
    code, out, _ = run_cli(
        "evolve", "--family", "hahn", "--N", "6", "--alpha", "1", "--beta", "1",
        "--s", "0", "--r", "6", "--times", repr(math.pi), "--method", "closed", "--format", "json",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["family"] == "hahn" and len(payload["rows"]) == 1
    expected = dynamics.hahn_fN0_abs_symmetric(1.0, 6, math.pi)
    assert payload["rows"][0]["abs_f"] == pytest.approx(expected, abs=1e-12)


def test_evolve_linspace_grid(run_cli):
    """--steps counts intervals: steps + 1 times including both ends."""
    code, out, _ = run_cli(
        "evolve", "--family", "krawtchouk", "--N", "3", "--p", "0.4",
        "--r", "3", "--t-min", "0", "--t-max", "2", "--steps", "4",
    )
    assert code == 0
    assert [row["t"] for row in _rows(out)] == ["0", "0.5", "1", "1.5", "2"]


def test_evolve_empty_time_grid(run_cli):
    """An empty --times list is invalid input."""
    code, _, err = run_cli("evolve", "--family", "krawtchouk", "--N", "3", "--p", "0.4", "--times", "")
    assert code == 2
    assert "empty" in err


def test_evolve_missing_time_grid(run_cli):
    """Neither --times nor --t-min/--t-max."""
    code, _, _ = run_cli("evolve", "--family", "krawtchouk", "--N", "3", "--p", "0.4")
    assert code == 2


def test_evolve_site_out_of_support(run_cli):
    """r beyond N exits 2."""
    code, _, _ = run_cli("evolve", "--family", "krawtchouk", "--N", "4", "--p", "0.5", "--r", "7", "--times", "1")
    assert code == 2


def test_evolve_discrepancy_exit(run_cli):
    """A tolerance below rounding level reports a discrepancy."""
    code, out, err = run_cli(
        "evolve", "--family", "krawtchouk", "--N", "5", "--p", "0.3",
        "--times", "1.3", "--method", "all", "--tol", "1e-300",
    )
    assert code == 3
    assert out.startswith("t,r,s")
    assert "max discrepancy" in err


@pytest.mark.parametrize(
    "family_args",
    [("--family", "charlier", "--alpha", "2"), ("--family", "meixner", "--b", "1", "--c", "0.5")],
    ids=["charlier", "meixner"],
)
def test_evolve_all_routes_infinite_family(run_cli, family_args):
    """The oracle chain outgrows the reported sites, so it matches the closed form at t = pi."""
    code, out, err = run_cli("evolve", *family_args, "--s", "0", "--times", repr(math.pi), "--method", "all")
    assert code == 0, err
    rows = _rows(out)
    assert {row["method"] for row in rows} == {"closed", "oracle"}
    assert len(rows) > 2 * 20


def test_evolve_is_deterministic(run_cli):
    """Identical arguments give byte-identical output."""
    argv = (
        "evolve", "--family", "dualhahn", "--N", "5", "--gamma", "0.3", "--delta", "1.2",
        "--s", "1", "--t-min", "0", "--t-max", "3", "--steps", "6", "--method", "all",
    )
    first = run_cli(*argv)
    second = run_cli(*argv)
    assert first[0] == 0
    assert first[1] == second[1]


def test_evolve_thread_setting_does_not_change_output(run_cli, monkeypatch):
    """JACOBI_CHAIN_THREADS only changes scheduling."""
    from app.config import settings

    argv = ("evolve", "--family", "hahn", "--N", "5", "--alpha", "0.5", "--beta", "2", "--times", "0.4,2.2")
    monkeypatch.setattr(settings, "JACOBI_CHAIN_THREADS", 1)
    serial = run_cli(*argv)
    monkeypatch.setattr(settings, "JACOBI_CHAIN_THREADS", 4)
    parallel = run_cli(*argv)
    assert serial[1] == parallel[1]


# ── pst-scan ──────────────────────────────────────────────────────────────────

def test_pst_scan_dualhahn(run_cli):
    """gamma=delta=1/2, N=5 over [0, 4 pi]: transfer at pi and 3 pi."""
    code, out, _ = run_cli(
        "pst-scan", "--family", "dualhahn", "--N", "5", "--gamma", "0.5", "--delta", "0.5",
        "--t-min", "0", "--t-max", repr(4 * math.pi), "--steps", "400",
    )
    assert code == 0
    assert out.splitlines()[0] == "t_peak,fidelity,family,params"
    rows = _rows(out)
    assert [float(row["t_peak"]) for row in rows] == pytest.approx([math.pi, 3 * math.pi], abs=1e-5)
    assert all(float(row["fidelity"]) >= 1.0 - 1e-6 for row in rows)
    assert rows[0]["family"] == "dualhahn"
    assert rows[0]["params"] == "N=5 gamma=0.5 delta=0.5"


def test_pst_scan_none_found(run_cli):
    """Skewed Krawtchouk has no perfect transfer: header only."""
    code, out, _ = run_cli(
        "pst-scan", "--family", "krawtchouk", "--N", "6", "--p", "0.3",
        "--t-min", "0", "--t-max", "7", "--steps", "70",
    )
    assert code == 0
    assert out == "t_peak,fidelity,family,params\n"


def test_pst_scan_bad_threshold(run_cli):
    """threshold outside (0, 1] is invalid input."""
    code, _, _ = run_cli(
        "pst-scan", "--family", "krawtchouk", "--N", "4", "--p", "0.5",
        "--times", "1,2", "--threshold", "1.5",
    )
    assert code == 2


# ── argument errors ───────────────────────────────────────────────────────────

def test_unknown_family(run_cli):
    """argparse rejects families outside the six supported ones."""
    code, _, _ = run_cli("build", "--family", "legendre", "--N", "2")
    assert code == 2


def test_run_config_tol_follows_settings(monkeypatch):
    """The default --tol is DISCREPANCY_TOL, not a second constant."""
    from app.config import settings
    from app.models import Command, RunConfig

    monkeypatch.setattr(settings, "DISCREPANCY_TOL", 3e-7)
    assert RunConfig(command=Command.BUILD).tol == 3e-7

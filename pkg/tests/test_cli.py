import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from crossqed import cli
from crossqed.core import NumericalFailure

GOLDEN = Path(__file__).parent / "golden"


def run(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "crossqed", *args], capture_output=True, text=True, cwd=cwd
    )


def table(text):
    lines = text.splitlines()
    assert lines[0].startswith("# config: ")
    return json.loads(lines[0][len("# config: "):]), list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


@pytest.fixture
def config(tmp_path):
    def write(**fields):
        path = tmp_path / "run.json"
        path.write_text(json.dumps(fields))
        return str(path)

    return write


def test_response_matches_golden(config):
    proc = run("response", "--config", config(cooperativity=10, sweep_points=5, sweep_min=-2, sweep_max=2))
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout == (GOLDEN / "response_C10.csv").read_text()


def test_response_values(config):
    proc = run("response", "--config", config(cooperativity=10, sweep_points=3, sweep_min=-1, sweep_max=1))
    resolved, rows = table(proc.stdout)
    assert resolved["sweep_axis"] == "omega" and resolved["sweep_points"] == 3
    centre = [r for r in rows if float(r["omega"]) == 0 and r["atom"] == "g1"][0]
    assert float(centre["t2"]) == pytest.approx((40 / 41) ** 2, rel=1e-10)
    assert all(float(r["r2"]) == pytest.approx(1.0) for r in rows if r["atom"] == "g2")


def test_lossless_response_is_unitary(config):
    proc = run("response", "--config", config(g_a=1.5, gamma=0.0, sweep_points=7))
    _, rows = table(proc.stdout)
    for r in rows:
        assert float(r["r2"]) + float(r["t2"]) == pytest.approx(1.0, abs=1e-10)


def test_output_is_deterministic(config, tmp_path):
    cfg = config(sweep_points=4)
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("compare-dk", "--config", cfg, "--out", str(out1)).returncode == 0
    assert run("compare-dk", "--config", cfg, "--out", str(out2), "--workers", "2").returncode == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_compare_dk_rows(config):
    proc = run("compare-dk", "--config", config(sweep_min=0.25, sweep_max=100, sweep_points=3), "--json")
    rows = json.loads(proc.stdout)
    assert rows[0]["P_F"] == pytest.approx(1.0)
    assert rows[-1]["ratio"] == pytest.approx(0.5, rel=1e-2)


def test_compare_dk_at_ten(config):
    proc = run("compare-dk", "--config", config(sweep_min=10, sweep_max=10, sweep_points=1))
    _, rows = table(proc.stdout)
    assert round(float(rows[0]["P_F"]) * 100, 2) == 9.52
    assert round(float(rows[0]["P_F_DK"]) * 100, 2) == 18.14


def test_set_overrides_config(config):
    proc = run("response", "--config", config(cooperativity=10), "--set", "sweep_points=2", "--set", "atom=g2")
    resolved, rows = table(proc.stdout)
    assert resolved["sweep_points"] == 2 and resolved["atom"] == "g2"
    assert len(rows) == 4


def test_fig2_small_sweep(config):
    proc = run("fig2", "--config", config(sweep_points=2, sweep_min=0.05, sweep_max=5, panels="a", tau_p=20))
    assert proc.returncode == 0, proc.stderr
    _, rows = table(proc.stdout)
    assert set(rows[0]) == {"g", "C", "swap_analytic", "swap_semiclassical", "swap_exact"}
    big = rows[-1]
    assert float(big["swap_exact"]) == pytest.approx(float(big["swap_analytic"]), abs=1e-2)


@pytest.mark.parametrize(
    "args",
    [
        ("response", "--set", "bogus=1"),
        ("response", "--set", "cooperativity=-1"),
        ("response", "--set", "cooperativity=1", "--set", "g_a=1"),
        ("response", "--config", "missing.json"),
        ("fredkin", "--set", "biphoton_backend=none", "--set", "cooperativity=5"),
        ("fredkin", "--set", "sweep_axis=C"),
        ("response", "--set", "sweep_axis=g", "--set", "cooperativity=1"),
    ],
)
def test_config_errors_exit_2(args, tmp_path):
    proc = run(*args, cwd=tmp_path)
    assert proc.returncode == 2
    assert "config error" in proc.stderr
    assert proc.stdout == ""


def test_bad_json_exit_2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run("response", "--config", str(path)).returncode == 2


def test_unresolved_oracle_exits_4(config):
    cfg = config(cooperativity=10, tau_p=10, timebin_dt=0.1, oracle_tol=1e-9)
    proc = run("oracle", "--config", cfg)
    assert proc.returncode == 4
    assert "convergence" in proc.stderr


def test_oracle_ladder(config):
    cfg = config(g_a=0.0, tau_p=10, timebin_dt=0.1, photons="a", atom="g2", oracle_tol=1e-3)
    proc = run("oracle", "--config", cfg)
    assert proc.returncode == 0, proc.stderr
    _, rows = table(proc.stdout)
    assert [r["M"] for r in rows][-1] == "inf"
    assert float(rows[-1]["port_a"]) == pytest.approx(1.0, abs=1e-4)


def test_numerical_failure_exits_3(monkeypatch, capsys):
    def boom(*a, **k):
        raise NumericalFailure("trace drifted")

    monkeypatch.setattr(cli, "build_table", boom)
    assert cli.main(["response", "--set", "cooperativity=1"]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_console_script_installed():
    proc = subprocess.run(["crossqed", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "fig2" in proc.stdout

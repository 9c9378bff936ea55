import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from pmuobs.cli import EXIT_CONFIG, EXIT_OK, main
from pmuobs.config import bundled_scenario_path


@pytest.fixture(scope="module")
def short_config(tmp_path_factory):
    """Bundled scenario-2 config trimmed to a quick horizon for CLI tests."""
    src = bundled_scenario_path("scenario2_case1").read_text()
    src = src.replace("t_end = 8.0", "t_end = 4.0")
    path = tmp_path_factory.mktemp("cfg") / "short.toml"
    path.write_text(src)
    return path


def run_cli(*argv):
    return main(list(argv))


def test_validate_bundled_ok(capsys):
    rc = run_cli("validate", "--config", str(bundled_scenario_path("scenario1_case1")))
    assert rc == EXIT_OK
    assert "ok" in capsys.readouterr().out


def test_validate_reports_all_problems(tmp_path, capsys):
    src = bundled_scenario_path("scenario1_case1").read_text()
    src = src.replace("dt_sim = 0.008333333333333333", "dt_sim = -1.0")
    src = src.replace('kind = "none"', 'kind = "mauve"')
    bad = tmp_path / "bad.toml"
    bad.write_text(src)
    rc = run_cli("validate", "--config", str(bad))
    out = capsys.readouterr().out
    assert rc == EXIT_CONFIG
    assert "dt_sim" in out and "noise.kind" in out


def test_missing_config_no_partial_outputs(tmp_path, capsys):
    out_dir = tmp_path / "artifacts"
    rc = run_cli("run", "--config", str(tmp_path / "missing.toml"),
                 "--out", str(out_dir))
    assert rc == EXIT_CONFIG
    assert not out_dir.exists()


def test_run_writes_all_artifacts(short_config, tmp_path, capsys):
    out = tmp_path / "out"
    rc = run_cli("run", "--config", str(short_config), "--out", str(out))
    assert rc == EXIT_OK
    for name in ("trajectory.csv", "pmu.csv", "estimates.csv",
                 "report.txt", "report.csv", "manifest.json"):
        assert (out / name).exists(), name

    with open(out / "trajectory.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "machine_id", "x1", "x2", "x3", "Vf", "q", "Ef",
                       "p1", "p2", "p3", "Vt", "theta_t", "omega_t"]
    assert len(rows) == 1 + 3 * (4 * 120 + 1)

    with open(out / "pmu.csv") as fh:
        pmu_rows = list(csv.reader(fh))
    assert pmu_rows[0] == ["t", "machine_id", "y1", "y2", "y3", "y4", "y5"]
    assert len(pmu_rows) == 1 + 3 * (4 * 60 + 1)

    with open(out / "estimates.csv") as fh:
        est_rows = list(csv.reader(fh))
    assert est_rows[0][:5] == ["t", "machine_id", "x1_hat", "x3_hat", "clamped"]
    assert len(est_rows) == 1 + (4 * 60 + 1)  # one observed machine

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["resolved_config"]["label"] == "scenario2_case1"
    report = (out / "report.txt").read_text()
    assert "sMAPE" in report and "G1" in report


def test_case_flag_overrides_noise(short_config, tmp_path, capsys):
    out = tmp_path / "case3"
    rc = run_cli("run", "--config", str(short_config), "--out", str(out),
                 "--case", "3")
    assert rc == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["resolved_config"]["noise"]["kind"] == "laplacian"


def test_byte_identical_reruns(short_config, tmp_path, capsys):
    out1 = tmp_path / "r1"
    out2 = tmp_path / "r2"
    assert run_cli("run", "--config", str(short_config), "--out", str(out1),
                   "--case", "2", "--seed", "7") == EXIT_OK
    assert run_cli("run", "--config", str(short_config), "--out", str(out2),
                   "--case", "2", "--seed", "7") == EXIT_OK
    for name in ("trajectory.csv", "pmu.csv", "estimates.csv", "report.txt"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_seed_changes_noise_stream(short_config, tmp_path, capsys):
    out1 = tmp_path / "s1"
    out2 = tmp_path / "s2"
    run_cli("run", "--config", str(short_config), "--out", str(out1),
            "--case", "2", "--seed", "7")
    run_cli("run", "--config", str(short_config), "--out", str(out2),
            "--case", "2", "--seed", "8")
    assert (out1 / "pmu.csv").read_bytes() != (out2 / "pmu.csv").read_bytes()


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "pmuobs.cli", "validate", "--config",
         str(bundled_scenario_path("scenario1_case1"))],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0

import csv
import math
import subprocess
import sys

import pytest

from syncmem import cli
from syncmem.errors import InvalidArgumentError


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_scenario_config_defaults():
    config = cli.ScenarioConfig()
    assert config.case == 1
    assert config.t0 == -5.0
    assert config.T_hold == 5.0
    assert config.a0 == 1.0 + 0j
    assert config.gamma_over_kappa == 0.0
    assert config.n_bar == 20.0
    assert config.dt == 1e-3
    assert config.output_dir == "out"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"case": 3},
        {"case": True},
        {"t0": float("nan")},
        {"T_hold": -1.0},
        {"gamma_over_kappa": -0.01},
        {"n_bar": -1.0},
        {"dt": 0.0},
        {"a0": complex("inf")},
        {"output_dir": ""},
    ],
)
def test_scenario_config_rejects_bad_fields(kwargs):
    with pytest.raises(InvalidArgumentError):
        cli.ScenarioConfig(**kwargs)


def test_sweep_config_validation():
    base = cli.ScenarioConfig()
    sweep = cli.SweepConfig(base=base, axis="n_bar", values=(3, 1.5))
    assert sweep.values == (3.0, 1.5)
    assert [p.n_bar for p in sweep.points()] == [3.0, 1.5]
    assert all(p.T_hold == base.T_hold for p in sweep.points())
    with pytest.raises(InvalidArgumentError):
        cli.SweepConfig(base=base, axis="dt", values=(1e-3,))
    with pytest.raises(InvalidArgumentError):
        cli.SweepConfig(base=base, axis="T_hold", values=())
    with pytest.raises(InvalidArgumentError):
        cli.SweepConfig(base=base, axis="T_hold", values=(float("inf"),))


def test_parse_config_file(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text(
        "# storage benchmark\n"
        "case = 1\n"
        "\n"
        "t0 = -5  # pulse center\n"
        "a0 = 0.6-0.8j\n"
        "gamma_over_kappa = 0.0125\n"
        "output_dir = runs/loss\n"
    )
    values = cli.parse_config_file(str(path))
    assert values == {
        "case": 1,
        "t0": -5.0,
        "a0": 0.6 - 0.8j,
        "gamma_over_kappa": 0.0125,
        "output_dir": "runs/loss",
    }


@pytest.mark.parametrize(
    "line",
    ["volume = 11", "case 1", "case = maybe", "dt = "],
)
def test_parse_config_file_rejects_bad_lines(tmp_path, line):
    path = tmp_path / "bad.cfg"
    path.write_text(line + "\n")
    with pytest.raises(InvalidArgumentError):
        cli.parse_config_file(str(path))


def test_run_defaults_reproduce_primary_numbers(tmp_path, capsys):
    out = tmp_path / "primary"
    assert cli.main(["run", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert f"wrote {out / 'trajectory.csv'}" in printed
    assert "verdict_coherent=pass" in printed
    for name in ("trajectory.csv", "schedule.csv", "summary.csv"):
        assert (out / name).exists()
    (row,) = read_rows(out / "summary.csv")
    assert row["case"] == "1"
    assert row["a0"] == "1+0j"
    assert row["dt"] == "0.001"
    assert abs(float(row["sqrt_eta"]) - 0.999954) < 1e-5
    assert float(row["sqrt_eta"]) >= 0.999
    assert float(row["vacuum_residual"]) < 1e-3
    assert abs(float(row["eta_threshold"]) - 0.611183) < 1e-5
    assert row["verdict_coherent"] == row["verdict_n1"] == row["verdict_n2"] == "pass"
    assert row["error"] == ""


def test_run_case2_defaults(tmp_path):
    out = tmp_path / "case2"
    assert cli.main(["run", "--case", "2", "--out", str(out)]) == 0
    (row,) = read_rows(out / "summary.csv")
    assert row["dt"] == "0.00025"
    assert float(row["sqrt_eta"]) >= 0.99
    assert float(row["vacuum_residual"]) < 2e-3


def test_run_lossy_matches_reference_efficiency(tmp_path):
    out = tmp_path / "lossy"
    assert cli.main(["run", "--gamma", "0.05", "--out", str(out)]) == 0
    (row,) = read_rows(out / "summary.csv")
    assert abs(float(row["sqrt_eta"]) - 0.50) < 0.02


def test_run_amplitude_does_not_change_efficiency(tmp_path):
    plain = tmp_path / "plain"
    scaled = tmp_path / "scaled"
    assert cli.main(["run", "--out", str(plain)]) == 0
    assert cli.main(["run", "--a0", "0.3-0.4j", "--out", str(scaled)]) == 0
    (base_row,) = read_rows(plain / "summary.csv")
    (scaled_row,) = read_rows(scaled / "summary.csv")
    assert scaled_row["a0"] == "0.3-0.4j"
    assert abs(float(scaled_row["sqrt_eta"]) - float(base_row["sqrt_eta"])) < 1e-9


def test_run_config_file_with_flag_override(tmp_path):
    config = tmp_path / "scenario.cfg"
    config.write_text("gamma_over_kappa = 0.0125\nn_bar = 20\n")
    out = tmp_path / "merged"
    code = cli.main(["run", "--config", str(config), "--gamma", "0.05", "--out", str(out)])
    assert code == 0
    (row,) = read_rows(out / "summary.csv")
    assert row["gamma_over_kappa"] == "0.05"
    assert abs(float(row["sqrt_eta"]) - 0.4978) < 1e-3


def test_run_is_byte_deterministic(tmp_path):
    first = tmp_path / "a"
    second = tmp_path / "b"
    assert cli.main(["run", "--out", str(first)]) == 0
    assert cli.main(["run", "--out", str(second)]) == 0
    for name in ("trajectory.csv", "schedule.csv", "summary.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_run_too_coarse_step_exits_3(tmp_path, capsys):
    out = tmp_path / "stiff"
    code = cli.main(["run", "--case", "2", "--dt", "1e-3", "--out", str(out)])
    assert code == 3
    message = capsys.readouterr().err
    assert "need dt <=" in message
    assert "0.000336" in message


def test_run_rejects_bad_flags(tmp_path, capsys):
    assert cli.main(["run", "--case", "7", "--out", str(tmp_path)]) == 2
    assert cli.main(["run", "--gamma", "-0.5", "--out", str(tmp_path)]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2
    capsys.readouterr()


def test_cli_usage_errors():
    assert cli.main([]) == 2
    assert cli.main(["frobnicate"]) == 2
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["frobnicate"])
    assert cli.main(["--help"]) == 0


def test_sweep_storage_time_table(tmp_path):
    out = tmp_path / "table"
    code = cli.main(
        ["sweep", "--axis", "T_hold", "--values", "5,10,15,20", "--gamma", "0.01", "--out", str(out)]
    )
    assert code == 0
    rows = read_rows(out / "sweep.csv")
    assert [row["T_hold"] for row in rows] == ["5", "10", "15", "20"]
    expected = (0.75, 0.63, 0.53, 0.44)
    for row, reference in zip(rows, expected):
        assert abs(float(row["F_coherent"]) - reference) < 0.02
    verdicts = [row["verdict_coherent"] for row in rows]
    assert verdicts == ["pass", "pass", "pass", "fail"]
    assert all(row["verdict_n2"] == "pass" for row in rows)


def test_sweep_single_lossless_point(tmp_path):
    out = tmp_path / "lossless"
    code = cli.main(["sweep", "--axis", "gamma_over_kappa", "--values", "0", "--out", str(out)])
    assert code == 0
    (row,) = read_rows(out / "sweep.csv")
    assert float(row["sqrt_eta"]) >= 0.999


def test_sweep_sorts_rows_and_ignores_input_order(tmp_path):
    sorted_out = tmp_path / "sorted"
    shuffled_out = tmp_path / "shuffled"
    args = ["sweep", "--axis", "T_hold", "--gamma", "0.01", "--nbar", "20"]
    assert cli.main(args + ["--values", "5,10,15,20", "--out", str(sorted_out)]) == 0
    assert cli.main(args + ["--values", "15,5,20,10", "--out", str(shuffled_out)]) == 0
    assert (sorted_out / "sweep.csv").read_bytes() == (shuffled_out / "sweep.csv").read_bytes()


def test_sweep_worker_pool_is_invisible(tmp_path, monkeypatch):
    serial = tmp_path / "serial"
    pooled = tmp_path / "pooled"
    args = ["sweep", "--axis", "T_hold", "--values", "5,10", "--gamma", "0.01"]
    assert cli.main(args + ["--out", str(serial)]) == 0
    monkeypatch.setenv("SYNCMEM_WORKERS", "2")
    assert cli.main(args + ["--out", str(pooled)]) == 0
    assert (serial / "sweep.csv").read_bytes() == (pooled / "sweep.csv").read_bytes()


def test_sweep_records_failing_point_and_continues(tmp_path):
    out = tmp_path / "partial"
    code = cli.main(["sweep", "--axis", "T_hold", "--values", "5.0005,5", "--out", str(out)])
    assert code == 0
    rows = read_rows(out / "sweep.csv")
    assert len(rows) == 2
    good, bad = rows
    assert good["T_hold"] == "5"
    assert good["error"] == ""
    assert float(good["sqrt_eta"]) >= 0.999
    assert bad["T_hold"] == "5.0005"
    assert bad["error"] != ""
    assert bad["sqrt_eta"] == ""


def test_sweep_empty_values_exits_2(tmp_path, capsys):
    code = cli.main(["sweep", "--axis", "T_hold", "--values", "", "--out", str(tmp_path)])
    assert code == 2
    assert "non-empty" in capsys.readouterr().err


def test_verdict_prints_pass_fail_blocks(tmp_path, capsys):
    path = tmp_path / "summary.csv"
    path.write_text("eta,n_bar\n0.755832,20\n0.559935,20\n")
    assert cli.main(["verdict", str(path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "row 1: eta=0.755832 n_bar=20"
    assert lines[1] == "  coherent n_bar=20: F=0.745601 bound=0.512195 PASS"
    assert lines[2].startswith("  n_m=1:") and lines[2].endswith("PASS")
    assert lines[3].startswith("  n_m=2:") and lines[3].endswith("PASS")
    assert lines[4] == "row 2: eta=0.559935 n_bar=20"
    assert lines[5].endswith("FAIL")
    assert lines[6].endswith("PASS")
    assert lines[7].endswith("PASS")


def test_verdict_row_selection(tmp_path, capsys):
    path = tmp_path / "summary.csv"
    path.write_text("eta,n_bar\n0.755832,20\n0.559935,20\n")
    assert cli.main(["verdict", str(path), "--row", "2"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("row 2:")
    assert "row 1:" not in out
    assert cli.main(["verdict", str(path), "--row", "3"]) == 2
    capsys.readouterr()


@pytest.mark.parametrize(
    "content",
    [
        "eta,n_bar\n",
        "sqrt_eta,n_bar\n0.9,20\n",
        "eta,n_bar\n,20\n",
        "eta,n_bar\n1.2,20\n",
    ],
)
def test_verdict_rejects_incomplete_rows(tmp_path, capsys, content):
    path = tmp_path / "summary.csv"
    path.write_text(content)
    assert cli.main(["verdict", str(path)]) == 2
    capsys.readouterr()


def test_oracle_reports_estimate_and_closed_form(capsys):
    args = ["oracle", "--eta", "0.5", "--nm", "2", "--samples", "2000", "--seed", "7"]
    assert cli.main(args) == 0
    first = capsys.readouterr().out
    pairs = dict(piece.split("=") for piece in first.split())
    assert pairs["n_samples"] == "2000"
    mean, stderr = float(pairs["mean"]), float(pairs["stderr"])
    assert abs(mean - float(pairs["closed_form"])) < 5 * stderr
    assert cli.main(args) == 0
    assert capsys.readouterr().out == first


def test_oracle_worker_env(monkeypatch, capsys):
    args = ["oracle", "--eta", "0.25", "--nm", "1", "--samples", "5000", "--seed", "3"]
    assert cli.main(args) == 0
    serial = capsys.readouterr().out
    monkeypatch.setenv("SYNCMEM_WORKERS", "2")
    assert cli.main(args) == 0
    assert capsys.readouterr().out == serial
    monkeypatch.setenv("SYNCMEM_WORKERS", "zero")
    assert cli.main(args) == 2
    monkeypatch.setenv("SYNCMEM_WORKERS", "0")
    assert cli.main(args) == 2
    capsys.readouterr()


def test_oracle_rejects_bad_parameters(capsys):
    assert cli.main(["oracle", "--eta", "1.5", "--nm", "1"]) == 2
    assert cli.main(["oracle", "--eta", "0.5", "--nm", "1", "--samples", "999"]) == 2
    capsys.readouterr()


def test_console_script_is_installed():
    result = subprocess.run(
        [sys.executable, "-m", "syncmem.cli", "--help"], capture_output=True, text=True
    )
    assert result.returncode == 0
    assert "run" in result.stdout and "oracle" in result.stdout

import csv
import json

import pytest

from qficodim.cli import EXIT_CONFIG, EXIT_CRITICAL, EXIT_NUMERICAL, EXIT_OK, OUTPUT_ENV, main


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_models_lists_everything(capsys):
    assert main(["models"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in ("ssh", "chern", "weyl", "linearized:p=N"):
        assert name in out
    assert "velocities" in out


def test_sweep_is_byte_identical(tmp_path):
    args = ["sweep", "--model", "linearized:p=1", "--m-min", "1e-3", "--m-max", "1e-1", "--points-per-decade", "8"]
    assert main(["--out", str(tmp_path / "a")] + args) == EXIT_OK
    assert main(["--out", str(tmp_path / "b"), "--threads", "3"] + args) == EXIT_OK
    a = (tmp_path / "a" / "linearized_p_1_sweep.csv").read_bytes()
    b = (tmp_path / "b" / "linearized_p_1_sweep.csv").read_bytes()
    assert a == b
    assert a.startswith(b"m,qfi,err_estimate\n")
    meta = json.loads((tmp_path / "a" / "linearized_p_1_sweep.json").read_text())
    assert meta["n_points"] == 17 and meta["source"]["p"] == 1


def test_fit_from_csv_equals_inline(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["--out", out, "sweep", "--model", "linearized:p=3"]) == EXIT_OK
    assert main(["--out", out, "fit", "--input", str(tmp_path / "linearized_p_3_sweep.csv")]) == EXIT_OK
    assert main(["--out", out, "fit", "--model", "linearized:p=3"]) == EXIT_OK
    a = json.loads((tmp_path / "linearized_p_3_sweep_fit.json").read_text())
    b = json.loads((tmp_path / "linearized_p_3_fit.json").read_text())
    assert a["class"] == b["class"] == "const_plus_power"
    for key in ("exponent", "amplitude", "background"):
        assert a[key] == pytest.approx(b[key], rel=1e-12, abs=1e-12)


def test_fit_p2_defaults_to_log(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "fit", "--model", "linearized:p=2"]) == EXIT_OK
    assert ": log, c=" in capsys.readouterr().out


def test_figure1_outputs(tmp_path):
    assert main(["--out", str(tmp_path), "figure1", "--points-per-decade", "4"]) == EXIT_OK
    curves = {p: read_csv(tmp_path / f"figure1_p{p}.csv") for p in (1, 2, 3)}
    at = {p: next(float(r["qfi"]) for r in rows if abs(float(r["m"]) - 1e-3) < 1e-12)
          for p, rows in curves.items()}
    assert at[1] > 10 * at[3]
    assert at[1] > at[2] > at[3]
    long = read_csv(tmp_path / "figure1_long.csv")
    assert len(long) == sum(len(r) for r in curves.values())
    assert {r["p"] for r in long} == {"1", "2", "3"}


def test_rg_check_table(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "rg-check", "--p", "1", "--m", "1e-4"]) == EXIT_OK
    rows = read_csv(tmp_path / "rg_check.csv")
    assert len(rows) == 1
    assert float(rows[0]["ratio_m_over_bm"]) == pytest.approx(2.0, rel=1e-3)


def test_invariants(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "invariants", "--m", "-0.5", "--m", "0.5"]) == EXIT_OK
    rows = read_csv(tmp_path / "invariants.csv")
    assert [int(r["winding_ssh"]) for r in rows] == [1, 0]
    assert abs(int(rows[0]["chern_qwz"]) - int(rows[1]["chern_qwz"])) == 1


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "command": "sweep", "model": "linearized:p=2", "m_min": 1e-3, "m_max": 1e-1,
        "points_per_decade": 4, "output_dir": str(tmp_path / "o"),
    }))
    assert main(["--config", str(cfg), "sweep", "--points-per-decade", "8"]) == EXIT_OK
    rows = read_csv(tmp_path / "o" / "linearized_p_2_sweep.csv")
    assert len(rows) == 17


def test_config_schema_error_names_field(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"command": "sweep", "points_per_decade": 2}')
    assert main(["--config", str(cfg)]) == EXIT_CONFIG
    assert "points_per_decade" in capsys.readouterr().err


def test_config_syntax_error_names_line(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"command": "sweep",\n  "m_min": 1e-3,,\n}')
    assert main(["--config", str(cfg)]) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err


def test_invalid_range_is_config_error(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "sweep", "--m-min", "1e-1", "--m-max", "1e-2"]) == EXIT_CONFIG
    assert main(["--out", str(tmp_path), "sweep", "--model", "kagome"]) == EXIT_CONFIG
    assert main([]) == EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path, capsys):
    code = main(["--out", str(tmp_path), "sweep", "--model", "linearized:p=1", "--rel-tol", "1e-12",
                 "--max-refinements", "1"])
    assert code == EXIT_NUMERICAL
    assert "ConvergenceError" in capsys.readouterr().err


def test_criticality_exit_code(tmp_path):
    assert main(["--out", str(tmp_path), "invariants", "--m", "0"]) == EXIT_CRITICAL


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["sweep", "--points-per-decade", "4"]) == EXIT_OK
    assert (tmp_path / "env" / "linearized_p_2_sweep.csv").exists()


def test_decorated_model_via_params(tmp_path):
    args = ["--out", str(tmp_path), "sweep", "--model", "linearized:p=1", "--param", "extra_bands=[[1.0, 0.1]]",
            "--m-min", "1e-2", "--m-max", "1e-1", "--points-per-decade", "4"]
    assert main(args) == EXIT_OK
    meta = json.loads((tmp_path / "linearized_p_1_sweep.json").read_text())
    assert meta["source"]["matrix_dim"] == 3

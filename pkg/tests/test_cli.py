import json

import pytest

from dimred_nls.cli import main

CGN = "0.6336962967985058"


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_g0_zero_potential(tmp_path, capsys):
    pot = tmp_path / "zero.json"
    pot.write_text('{"kind": "zero", "amplitude": 0.0}')
    code, out, _ = run(["g0", "--potential", str(pot), "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    assert out.strip() == "0.0"


def test_check_scalar_suite(tmp_path, capsys):
    code, out, _ = run(["check", "--suite", "scalar-interpolation", "--samples", "10000", "--out", str(tmp_path)], capsys)
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["pass_fraction"] == 1.0 and report["checks"][0]["resolution"]["samples"] == 10000


def test_validation_errors_are_single_json_lines(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"dt": 0.01, "unknown": 1}')
    for argv in (["evolve2d", "--config", str(cfg)], ["evolve2d", "--bogus", "1"], ["cgn", "--modes", "4"], []):
        code, _, err = run(argv, capsys)
        assert code == 1
        lines = err.strip().splitlines()
        assert len(lines) == 1 and json.loads(lines[0])["exit_code"] == 1


def test_dry_run_resolves_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"dt": 0.01, "t_final": 0.5}')
    code, out, _ = run(["evolve2d", "--config", str(cfg), "--t-final", "0.2", "--dry-run", "--threads", "2"], capsys)
    assert code == 0
    resolved = json.loads(out)
    assert resolved["dt"] == 0.01 and resolved["t_final"] == 0.2 and resolved["threads"] == 2


def test_threads_environment_fallback(monkeypatch, capsys):
    monkeypatch.setenv("DIMRED_NLS_THREADS", "3")
    code, out, _ = run(["g0", "--dry-run"], capsys)
    assert code == 0 and json.loads(out)["threads"] == 3


def test_evolve2d_outputs_and_determinism(tmp_path, capsys):
    argv = ["evolve2d", "--dt", "0.01", "--t-final", "0.2", "--g0=-5", "--n", "16", "--record-every", "5"]
    assert run(argv + ["--out", str(tmp_path / "a")], capsys)[0] == 0
    assert run(argv + ["--out", str(tmp_path / "b")], capsys)[0] == 0
    a = json.loads((tmp_path / "a" / "report.json").read_text())
    b = json.loads((tmp_path / "b" / "report.json").read_text())
    for d in (a, b):
        d.pop("metadata")
        d["config"].pop("out")
    assert a == b
    assert (tmp_path / "a" / "series.csv").read_text() == (tmp_path / "b" / "series.csv").read_text()
    assert (tmp_path / "a" / "fields" / "final.bin").read_bytes() == (tmp_path / "b" / "fields" / "final.bin").read_bytes()
    assert (tmp_path / "a" / "fields" / "final.bin.json").exists()
    assert a["mass_drift"] < 1e-12


def test_evolve3d_and_minimize(tmp_path, capsys):
    common = ["--cgn", CGN, "--potential-fraction", "0.5", "--n", "16"]
    code, _, _ = run(["evolve3d", "--dt", "0.01", "--t-final", "0.1", "--out", str(tmp_path / "e")] + common, capsys)
    assert code == 0
    code, out, _ = run(["minimize", "--out", str(tmp_path / "m")] + common, capsys)
    assert code == 0
    report = json.loads((tmp_path / "m" / "report.json").read_text())
    assert report["inside_window"]


def test_reduce_writes_report_and_csv(tmp_path, capsys):
    cfg = tmp_path / "ladder.json"
    cfg.write_text(json.dumps({"L_values": [0.5, 0.25], "t_final": 0.1, "checkpoints": 2, "n": 16,
                               "retained_modes": [8, 8], "cgn": float(CGN)}))
    code, out, _ = run(["reduce", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["valid"] and len(report["rungs"]) == 2
    assert "timestamp" in report["metadata"] and "timestamp" not in json.dumps({k: v for k, v in report.items() if k != "metadata"})
    assert (tmp_path / "series.csv").read_text().startswith("#")


def test_inadmissible_potential_exit_code(tmp_path, capsys):
    pot = tmp_path / "big.json"
    pot.write_text('{"kind": "separable", "amplitude": -50.0, "radius_x": 1.5707963267948966, "radius_z": 0.7853981633974483}')
    code, _, err = run(["reduce", "--potential", str(pot), "--potential-fraction", "null", "--cgn", CGN,
                        "--t-final", "0.1", "--checkpoints", "2", "--out", str(tmp_path)], capsys)
    assert code == 1
    assert json.loads(err)["error"] == "InadmissiblePotentialError"


def test_failed_run_exit_code(tmp_path, capsys):
    code, _, err = run(["cgn", "--modes", "8", "--restarts", "2", "--max-iter", "2", "--out", str(tmp_path)], capsys)
    assert code == 2
    assert json.loads(err)["exit_code"] == 2
    assert json.loads((tmp_path / "report.json").read_text())["ok"] is False

import json

import numpy as np
import pytest

from coagscale.cli import main
from coagscale.grid import build_grid
from coagscale.io import save_profile
from coagscale.kernel import KernelSpec
from coagscale.profile import Profile

SMALL = ["--x-min", "1e-4", "--x-max", "1e3", "--cells", "120"]


def run_cli(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_solve_writes_outputs(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "solve", "--alpha", "0.5", *SMALL, "--out", str(tmp_path))
    assert code == 0
    summary = json.loads(out)
    assert summary["command"] == "solve"
    for name in ("profile.csv", "profile.json", "solve_report.json"):
        assert (tmp_path / name).exists()
    rep = json.loads((tmp_path / "solve_report.json").read_text())
    assert rep["report"]["converged"] is True
    assert rep["manifest"]["spec"]["alpha"] == 0.5


def test_solve_is_deterministic(tmp_path, capsys):
    names = ("profile.csv", "profile.json", "solve_report.json")
    blobs = []
    for _ in range(2):
        assert run_cli(capsys, "solve", "--alpha", "0.5", *SMALL, "--out", str(tmp_path))[0] == 0
        blobs.append([(tmp_path / n).read_bytes() for n in names])
    assert blobs[0] == blobs[1]


def test_manifest_and_flag_precedence(tmp_path, capsys):
    man = tmp_path / "m.json"
    man.write_text(json.dumps({"spec": {"alpha": 0.25, "rho": 2.0},
                               "grid": {"x_min": 1e-4, "x_max": 1e3, "n_cells": 100}}))
    code, _, _ = run_cli(capsys, "solve", "--manifest", str(man), "--rho", "3",
                         "--out", str(tmp_path))
    assert code == 0
    meta = json.loads((tmp_path / "profile.json").read_text())
    assert meta["alpha"] == 0.25 and meta["rho"] == 3.0
    assert meta["moments"]["m1"] == pytest.approx(3.0, rel=1e-12)


def test_unknown_manifest_key(tmp_path, capsys):
    man = tmp_path / "m.json"
    man.write_text(json.dumps({"spec": {"beta": 1}}))
    code, out, err = run_cli(capsys, "solve", "--manifest", str(man), "--out", str(tmp_path))
    assert code == 1 and out == ""
    assert json.loads(err)["error"] == "invalid-manifest"


def test_error_reports_code_and_cleans_up(tmp_path, capsys):
    code, _, err = run_cli(capsys, "solve", "--x-min", "5", "--x-max", "1",
                           "--out", str(tmp_path))
    assert code == 1
    assert json.loads(err)["error"] == "invalid-bounds"
    assert list(tmp_path.iterdir()) == []


def test_validate_zero_profile(tmp_path, capsys):
    g = build_grid(1e-3, 1e2, 50)
    save_profile(tmp_path / "z.csv", Profile(g, np.zeros(50), KernelSpec(0.5)))
    code, _, _ = run_cli(capsys, "validate", str(tmp_path / "z.csv"), "--out", str(tmp_path))
    assert code == 0
    val = json.loads((tmp_path / "validation.json").read_text())
    assert all(v == 0 for v in val["validation"]["residual_norms"].values())


def test_validate_alpha_zero_has_null_b99(tmp_path, capsys):
    assert run_cli(capsys, "solve", *SMALL, "--out", str(tmp_path))[0] == 0
    code, _, _ = run_cli(capsys, "validate", str(tmp_path / "profile.csv"), "--out", str(tmp_path))
    assert code == 0
    assert json.loads((tmp_path / "validation.json").read_text())["validation"]["b99_gap"] is None


def test_uniqueness_verdict(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("COAGSCALE_THREADS", "1")
    code, out, _ = run_cli(capsys, "uniqueness", "--alpha", "0.5", *SMALL, "--out", str(tmp_path))
    assert code == 0
    data = json.loads((tmp_path / "uniqueness.json").read_text())
    assert data["verdict"] == "unique"
    assert (tmp_path / "uniqueness.csv").exists()


def test_baseline(tmp_path, capsys):
    code, _, _ = run_cli(capsys, "baseline", "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "bernstein.csv").read_text().startswith("xi,B\n")


def test_simulate_and_report(tmp_path, capsys):
    man = tmp_path / "m.json"
    man.write_text(json.dumps({"simulation": {
        "t_end": 2.0, "output_times": [1.0],
        "grid": {"x_min": 1e-3, "x_max": 1e4, "n_cells": 120}}}))
    code, _, _ = run_cli(capsys, "simulate", "--manifest", str(man), "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "timeseries.csv").read_text().startswith("t,mass,distance\n")
    code, _, _ = run_cli(capsys, "report", "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "report.txt").exists()

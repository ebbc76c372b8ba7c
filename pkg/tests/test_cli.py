import json
import subprocess
import sys

import pytest

from dirac_soliton import __version__
from dirac_soliton.cli import EXIT_IO, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, main
from dirac_soliton.radial_core import read_columns_csv

FAST = ["--n", "1000"]


def run(tmp_path, *args):
    return main([*args, "--output-dir", str(tmp_path), *FAST])


def test_ground_state(tmp_path, capsys):
    assert run(tmp_path, "ground-state", "--theta", "1") == EXIT_OK
    report = json.loads((tmp_path / "ground_state.json").read_text())
    assert report["shoot_param"] == pytest.approx(4.3373877, rel=1e-5)
    assert report["config"]["theta"] == 1.0
    assert abs(report["decay_fit"]["rate"] - 1.0) < 0.05
    assert list(read_columns_csv((tmp_path / "ground_state.csv").read_text())) == ["r", "Q", "Qprime"]
    assert "Q(0)" in capsys.readouterr().out


def test_solve_outputs(tmp_path):
    assert run(tmp_path, "solve", "--theta", "1", "--epsilon", "1e-3") == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["omega"] == pytest.approx(0.499)
    assert report["contraction"]["fixed_point_residual"] <= 1e-8
    assert report["profile"]["residual"] <= 1e-6
    for name in ("profile.csv", "perturbation.csv"):
        assert (tmp_path / name).stat().st_size > 0
    assert "shooting" not in report


def test_solve_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["solve", "--theta", "1", "--epsilon", "1e-3", "--output-dir", str(d), *FAST]) == 0
    for name in ("report.json", "profile.csv", "perturbation.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_omega_and_epsilon_agree(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["solve", "--theta", "1", "--epsilon", "1e-3", "--output-dir", str(a), *FAST])
    main(["solve", "--theta", "1", "--omega", "0.499", "--output-dir", str(b), *FAST])
    assert (a / "profile.csv").read_bytes() == (b / "profile.csv").read_bytes()


def test_solve_with_shooting(tmp_path):
    assert run(tmp_path, "solve", "--theta", "1", "--epsilon", "1e-2", "--shoot") == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["shooting"]["relative_difference"] < 1e-3
    assert (tmp_path / "shooting_profile.csv").exists()


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"theta": 1.0, "epsilon": 1e-2, "fp_tol": 1e-10}))
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--epsilon", "5e-3", "--output-dir", str(out), *FAST]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["epsilon"] == 5e-3
    assert report["config"]["fp_tol"] == 1e-10


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"theta": 1.0, "colour": "red"}))
    assert run(tmp_path, "ground-state", "--config", str(cfg)) == EXIT_USAGE


@pytest.mark.parametrize("args", [
    ["solve", "--theta", "2.5", "--epsilon", "1e-3"],
    ["solve", "--theta", "1"],
    ["solve", "--theta", "1", "--epsilon", "1e-3", "--omega", "0.499"],
    ["solve", "--theta", "1", "--omega", "0.6"],
    ["sweep", "--theta", "1", "--epsilon-list", ""],
    ["sweep", "--theta", "1", "--epsilon-list", "1e-3,1e-2"],
    ["lemmas", "--theta-list", "0.5"],
    ["frobnicate"],
])
def test_usage_errors(tmp_path, args):
    assert run(tmp_path, *args) == EXIT_USAGE


def test_solver_failure(tmp_path, capsys):
    assert run(tmp_path, "solve", "--theta", "1", "--epsilon", "0.45") == EXIT_SOLVER
    assert "ball-escape" in capsys.readouterr().err


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["ground-state", "--theta", "1", "--output-dir", str(blocker / "sub"), *FAST]) == EXIT_IO


def test_sweep(tmp_path):
    assert run(tmp_path, "sweep", "--theta", "1", "--epsilon-list", "1e-2,5e-3,2e-3") == EXIT_OK
    branch = json.loads((tmp_path / "branch.json").read_text())["branches"][0]
    assert branch["theta"] == 1.0
    assert len(branch["points"]) == 3
    assert branch["scaling_slope"] == pytest.approx(1.0, abs=0.1)


def test_lemmas(tmp_path):
    code = run(tmp_path, "lemmas", "--theta-list", "1,1.5", "--points-2d", "41",
               "--points-3d", "11", "--hardy-fields", "5")
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "lemmas.json").read_text())
    assert len(summary["sweeps"]) == 6
    assert summary["second_difference_zero_cases"]["max_abs_numerator"] == 0.0
    growth = [c for c in summary["counterexample"] if c["alpha"] == 2.0][0]
    assert growth["slope"] == pytest.approx(-0.5, abs=0.1)
    for name in ("lemma_sweeps.csv", "hardy.csv", "counterexample.csv"):
        assert (tmp_path / name).exists()


def test_version_and_module_entry():
    out = subprocess.run([sys.executable, "-m", "dirac_soliton", "--version"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert __version__ in out.stdout

import json
import subprocess
import sys

import numpy as np
import pytest

from eigenshape import cli
from eigenshape.gp import NumericalError


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_no_arguments_prints_usage(capsys):
    assert run() == 1
    assert "usage" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert run("frobnicate") == 1
    assert run("pca-report") == 1
    assert run("pca-report", "--problem", "circle1d", "--bogus") == 1
    assert run("fit-model") == 1
    assert run("optimize") == 1
    assert run("bench-opt", "--problem", "f5") == 1
    assert run("build-db", "--problem", "nonexistent") == 1


def test_missing_file_is_an_input_error(tmp_path):
    assert run("pca-report", "--db", tmp_path / "missing.csv") == 1
    assert run("bench-opt", "--config", tmp_path / "missing.json") == 1


def test_numerical_failure_exit_code(monkeypatch):
    def boom(args):
        raise NumericalError("singular")

    monkeypatch.setitem(cli.COMMANDS, "build-db", boom)
    assert run("build-db", "--problem", "circle1d") == 2


def test_pca_report_circle_has_one_significant_eigenvalue(tmp_path):
    out = tmp_path / "spectrum.csv"
    assert run("pca-report", "--problem", "circle1d", "--mapping", "contour", "--n", 5000, "--seed", 1,
               "--out", out) == 0
    lam = np.loadtxt(out, delimiter=",", skiprows=1)[:, 1]
    assert np.count_nonzero(lam > 1e-8 * lam[0]) == 1


def test_database_and_basis_round_trip(tmp_path):
    db, spec, basis = tmp_path / "db.csv", tmp_path / "s.csv", tmp_path / "basis.txt"
    assert run("build-db", "--problem", "three_circles", "--n", 200, "--out", db) == 0
    assert run("pca-report", "--db", db, "--out", spec, "--basis-out", basis) == 0
    assert basis.exists() and spec.read_text().startswith("j,eigenvalue,cumulative_pct")


def test_model_and_selection_commands(tmp_path):
    model, sel = tmp_path / "m.json", tmp_path / "sel.csv"
    assert run("fit-model", "--problem", "f2", "--n", 20, "--out", model) == 0
    assert len(json.loads(model.read_text())["X"]) == 20
    assert run("select-active", "--problem", "f2", "--n", 20, "--out", sel) == 0
    assert sel.read_text().startswith("j,theta_j,range_j,normalized_theta_j,active")


def test_optimize_from_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": "griewank40", "space": "x", "n_init": 4, "iterations": 1,
                               "fit_starts": 1, "population": 8, "generations": 2, "n_polish": 1}))
    out = tmp_path / "run.csv"
    assert run("optimize", "--config", cfg, "--out", out) == 0
    assert len(out.read_text().splitlines()) == 1 + 5


def test_bench_opt_is_deterministic(tmp_path):
    cfg = tmp_path / "fmg.json"
    cfg.write_text(json.dumps([{"problem": "griewank40", "space": "x", "n_init": 4, "iterations": 2,
                                "fit_starts": 1, "population": 8, "generations": 2, "n_polish": 1}]))
    outs = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for out in outs:
        assert run("bench-opt", "--problem", "griewank40", "--config", cfg, "--seed", 7, "--runs", 2,
                   "--targets", "1.0", "--out", out) == 0
    assert outs[0].read_text() == outs[1].read_text()


def test_bench_r2(tmp_path):
    out = tmp_path / "r2.csv"
    assert run("bench-r2", "--problem", "f2", "--n", 12, "--runs", 1, "--methods", "gp_alpha:3",
               "--out", out) == 0
    assert out.read_text().splitlines()[1].startswith("gp_alpha:3,12,")


@pytest.mark.slow
def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "eigenshape"], capture_output=True, text=True)
    assert proc.returncode == 1 and "usage" in proc.stderr

import json

import numpy as np
import pytest

from conftest import sphere_field
from palpsdf.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, main
from palpsdf.files import read_manifest, sha256_file
from palpsdf.grid import load_grid, save_grid
from palpsdf.reinit import ReinitWarning

SIM = ["simulate", "--shape", "sphere", "--radius", "0.1", "--n-samples", "40", "--seed", "7"]
GRID = ["--nodes", "32"]


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run_ok(argv):
    assert main(argv) == EXIT_OK, argv


def test_check_steady_state_worked_example(workdir, capsys):
    run_ok(["check-steady-state", "--E", "4480", "--rho", "960", "--ell", "0.005", "--Tc", "0.1"])
    out = capsys.readouterr().out
    assert "T_e = 2.315 ms" in out and "verdict: ok" in out
    data = json.loads((workdir / "steady_state.json").read_text())
    assert data["T_e_s"] == pytest.approx(2.31e-3, rel=0.01)
    assert (workdir / "steady_state.json.manifest.json").exists()


def test_simulate_is_deterministic(workdir):
    run_ok(SIM + ["--out", "a.jsonl"])
    run_ok(SIM + ["--out", "b.jsonl"])
    assert sha256_file("a.jsonl") == sha256_file("b.jsonl")
    run_ok(SIM[:-1] + ["8", "--out", "c.jsonl"])
    assert sha256_file("a.jsonl") != sha256_file("c.jsonl")


def test_manifest_regenerates_every_output(workdir):
    run_ok(SIM + ["--noise-sigma", "0", "--out", "p.jsonl"])
    run_ok(["reconstruct", "p.jsonl", *GRID, "--out", "g.json"])
    run_ok(["export-mesh", "g.json", "--out", "m.obj"])
    for out in ("p.jsonl", "g.json", "m.obj"):
        manifest = read_manifest(f"{out}.manifest.json")
        before = {p: sha256_file(p) for p in manifest["outputs"]}
        assert set(manifest["inputs"].values()) <= {sha256_file(p) for p in manifest["inputs"]}
        for p in manifest["outputs"]:
            (workdir / p).unlink()
        run_ok(manifest["argv"])
        assert {p: sha256_file(p) for p in manifest["outputs"]} == before


def test_simulate_manifest_echoes_config_and_seed(workdir):
    run_ok(SIM + ["--out", "p.jsonl"])
    m = read_manifest("p.jsonl.manifest.json")
    assert m["seed"] == 7 and m["command"] == "simulate"
    assert m["config"]["campaign"] == {"n_samples": 40, "forces": [3.0, 4.5], "punch_radius": 0.01,
                                       "noise_sigma": 1e-3, "rng_seed": 7}
    assert m["config"]["shape"]["radius"] == 0.1 and "PCG64" in m["config"]["rng"]


def test_reconstruct_noiseless_report(workdir, capsys):
    run_ok(SIM + ["--noise-sigma", "0", "--out", "p.jsonl"])
    run_ok(["reconstruct", "p.jsonl", *GRID, "--out", "g.json", "--report", "r.json"])
    rep = json.loads((workdir / "r.json").read_text())
    assert rep["E_hat_Pa"] == pytest.approx(8000.0, rel=1e-3)
    assert "E = 8000 Pa" in capsys.readouterr().out
    assert load_grid("g.json").geometry.dims == (32, 32, 32)


def test_chained_stages(workdir):
    run_ok(SIM + ["--forces", "0.04", "0.06", "3", "4.5", "--noise-sigma", "0", "--out", "p.jsonl"])
    run_ok(["estimate-kappa", "p.jsonl", "--out", "k.json"])
    assert json.loads((workdir / "k.json").read_text())["kappa_hat_per_m"] == pytest.approx(10.0, rel=0.05)
    run_ok(["estimate-modulus", "p.jsonl", "--out", "e.json"])
    assert json.loads((workdir / "e.json").read_text())["E_hat_Pa"] == pytest.approx(8000.0, rel=1e-9)
    run_ok(["reconstruct", "p.jsonl", *GRID, "--estimate-kappa", "--binary", "--out", "g.json"])
    run_ok(["reinit", "g.json", "--out", "g2.json"])
    assert np.array_equal(load_grid("g.json").values.shape, load_grid("g2.json").values.shape)


def test_convergence_csv_deterministic_apart_from_runtime(workdir):
    args = ["convergence", "--N", "10", "20", "--nodes", "24", "--seed", "3"]
    run_ok(args + ["--out", "a.csv"])
    run_ok(args + ["--out", "b.csv"])

    def strip(path):
        return [line.rsplit(",", 1)[0] for line in (workdir / path).read_text().splitlines()]

    a = strip("a.csv")
    assert a[0] == "N,d_N_m,eikonal_max,eikonal_mean" and len(a) == 3
    assert a == strip("b.csv")


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["check-steady-state", "--E", "4480"],
    ["check-steady-state", "--E", "-1", "--rho", "960", "--ell", "0.005", "--Tc", "0.1"],
    ["reconstruct", "missing.jsonl", "--out", "g.json"],
    ["export-mesh", "missing.json", "--out", "m.obj"],
    ["simulate", "--shape", "ellipsoid", "--out", "p.jsonl"],
    ["simulate", "--forces", "4.5", "3", "--out", "p.jsonl"],
    ["simulate", "--bogus-flag", "1", "--out", "p.jsonl"],
])
def test_validation_errors_exit_1(workdir, argv, capsys):
    assert main(argv) == EXIT_INVALID
    assert "error" in capsys.readouterr().err


def test_single_force_campaign_exits_1(workdir):
    run_ok(SIM + ["--forces", "3", "--out", "p.jsonl"])
    assert main(["estimate-modulus", "p.jsonl", "--out", "e.json"]) == EXIT_INVALID


def test_numerical_failures_exit_2(workdir):
    f, _ = sphere_field(31, scale=2.0)
    save_grid("d.json", f)
    with pytest.warns(ReinitWarning):
        assert main(["reinit", "d.json", "--max-iterations", "2", "--out", "r.json"]) == EXIT_NUMERICAL
    run_ok(SIM + ["--out", "p.jsonl"])
    argv = ["reconstruct", "p.jsonl", *GRID, "--poisson-max-iterations", "2", "--out", "g.json"]
    assert main(argv) == EXIT_NUMERICAL


def test_help_and_version(capsys):
    assert main(["--version"]) == 0
    assert "palpsdf" in capsys.readouterr().out
    assert main(["reconstruct", "--help"]) == 0

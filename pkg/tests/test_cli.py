"""Experiment runner: configs, outputs, exit codes, determinism."""

import os

import numpy as np
import pytest

from rpde_lab import cli, roughpath
from rpde_lab.configio import load_kv_file, write_kv_file


def run(args):
    return cli.main(args)


class TestBasics:
    def test_lift_writes_paths(self, tmp_path):
        out = tmp_path / "lift"
        assert run(["lift", "--seeds", "1,2", "--out", str(out)]) == 0
        rp = roughpath.load_csv(str(out / "path_seed1.csv"), gamma=0.49)
        assert rp.n_cells == 4 * 32  # default horizon times steps per unit
        assert (out / "manifest.txt").exists()

    def test_greedy_schema(self, tmp_path):
        out = tmp_path / "greedy"
        assert run(["greedy", "--seeds", "3", "--out", str(out)]) == 0
        lines = (out / "greedy.csv").read_text().splitlines()
        assert lines[0] == "interval,N,W,chi,eta"
        assert len(lines) == 2

    def test_specfun_cert(self, tmp_path):
        out = tmp_path / "cert"
        assert run(["specfun-cert", "--out", str(out)]) == 0
        lines = (out / "certificates.csv").read_text().splitlines()
        assert lines[0] == "beta,z_min,z_max,m_beta,n_grid"

    def test_gronwall_curve(self, tmp_path):
        out = tmp_path / "gr"
        assert run(["gronwall", "--out", str(out)]) == 0
        lines = (out / "gronwall_bound.csv").read_text().splitlines()
        assert lines[0] == "t,bound"

    def test_ergodic_report(self, tmp_path):
        out = tmp_path / "erg"
        assert run(["ergodic", "--seeds", ",".join(str(s) for s in range(6)),
                    "--out", str(out)]) == 0
        lines = (out / "ergodic.csv").read_text().splitlines()
        assert lines[0].startswith("q,k_q,kk_q,k_bold")
        assert lines[1].split(",")[-1] == "1"  # desk defaults pass the gap


class TestExitCodes:
    def test_missing_config_file(self, tmp_path):
        assert run(["solve", "--config", str(tmp_path / "nope.txt")]) == 2

    def test_missing_constants_file(self, tmp_path):
        cfg = tmp_path / "exp.txt"
        cfg.write_text("command = solve\nconstants = /nonexistent/cons.txt\n")
        assert run(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_no_command(self, tmp_path):
        cfg = tmp_path / "empty.txt"
        cfg.write_text("seeds = 1\n")
        assert run(["--config", str(cfg)]) == 2

    def test_numerics_exit_code(self, tmp_path):
        # unscaled rough noise at a large moment order trips the overflow guard
        cfg = tmp_path / "erg.txt"
        cfg.write_text("command = ergodic\nnoise_scale = 1.0\nhurst = 0.45\n"
                       "q_moment = 240\nseeds = 1,2,3,4\nhorizon = 4.0\n"
                       f"out = {tmp_path / 'o'}\n")
        assert run(["--config", str(cfg)]) == 3


class TestDeterminism:
    def test_solve_replay_and_jobs(self, tmp_path):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        assert run(["solve", "--seeds", "5,6", "--jobs", "1", "--out", str(out1)]) == 0
        assert run(["solve", "--seeds", "5,6", "--jobs", "2", "--out", str(out2)]) == 0
        for name in ("trajectory_seed5.csv", "trajectory_seed6.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_manifest_replay(self, tmp_path):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        assert run(["greedy", "--seeds", "7", "--out", str(out1)]) == 0
        assert run(["--config", str(out1 / "manifest.txt"), "--out", str(out2)]) == 0
        assert (out1 / "greedy.csv").read_bytes() == (out2 / "greedy.csv").read_bytes()

    def test_seed_offset_env(self, tmp_path, monkeypatch):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        monkeypatch.setenv(cli.SEED_ENV, "10")
        assert run(["lift", "--seeds", "1", "--out", str(out1)]) == 0
        assert (out1 / "path_seed11.csv").exists()
        monkeypatch.setenv(cli.SEED_ENV, "0")
        assert run(["lift", "--seeds", "11", "--out", str(out2)]) == 0
        a = (out1 / "path_seed11.csv").read_bytes()
        assert a == (out2 / "path_seed11.csv").read_bytes()

    def test_manifest_records_hash_and_versions(self, tmp_path):
        out = tmp_path / "m"
        assert run(["lift", "--seeds", "1", "--out", str(out)]) == 0
        pairs = load_kv_file(str(out / "manifest.txt"))
        for key in ("config_hash", "package_version", "numpy_version", "wall_time_s"):
            assert key in pairs


class TestPipelines:
    def test_bounds_pipeline_small(self, tmp_path):
        cfg = tmp_path / "bounds.txt"
        model = tmp_path / "model.txt"
        write_kv_file(str(model), {"n_modes": 8, "lambda_a": 4.0, "alpha": 0.0,
                                   "sigma_f": 0.25, "sigma_g": 0.0, "c_f": 0.5,
                                   "c_g": 0.0005, "g_kind": "linear"})
        cfg.write_text(f"command = bounds\nmodel = {model}\nseeds = 50,51,52\n"
                       f"train_seeds = 12\nhorizon = 4.0\nsteps_per_unit = 64\n"
                       f"out = {tmp_path / 'o'}\n")
        assert run(["--config", str(cfg)]) == 0
        rows = (tmp_path / "o" / "bounds.csv").read_text().splitlines()
        assert rows[0] == "seed,interval,kind,lhs,rhs,passed"
        assert all(line.endswith(",1") for line in rows[1:])
        cons_rows = (tmp_path / "o" / "constants.csv").read_text().splitlines()
        assert cons_rows[0] == "name,value,provenance"
        provs = {line.split(",")[-1] for line in cons_rows[1:]}
        assert provs <= {"primitive", "derived", "calibrated"}

    def test_absorb_small(self, tmp_path):
        cfg = tmp_path / "absorb.txt"
        cfg.write_text(f"command = absorb\nseeds = 1,2\ntrunc_k = 4\n"
                       f"eps_points = 5\nout = {tmp_path / 'o'}\n")
        assert run(["--config", str(cfg)]) == 0
        lines = (tmp_path / "o" / "absorb.csv").read_text().splitlines()
        assert lines[0].startswith("seed,radius")
        assert len(lines) == 3

    def test_pullback_small(self, tmp_path):
        cfg = tmp_path / "pull.txt"
        cfg.write_text(f"command = pullback\nseeds = 1\ntrunc_k = 3\n"
                       f"eps_points = 5\nt_list = 1,2\ncloud_points = 2\n"
                       f"out = {tmp_path / 'o'}\n")
        assert run(["--config", str(cfg)]) == 0
        lines = (tmp_path / "o" / "pullback.csv").read_text().splitlines()
        assert lines[0] == "seed,t,diameter,semidistance,radius,accepted"
        assert len(lines) == 3

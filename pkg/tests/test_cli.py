import json

import pytest

from bkl_lab import acceptance, cli


def write_cfg(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def ode_cfg(tmp_path, **over):
    data = {"mode": "ode", "seed": 5,
            "spec": {"law": {"kind": "binary"}, "beta": 1.0},
            "parameters": {"t_values": [1.0, 4.0]}}
    data.update(over)
    return write_cfg(tmp_path, "ode.json", data)


def estimate_cfg(tmp_path, **over):
    data = {"mode": "estimate", "seed": 3, "replicas": 20_000,
            "spec": {"law": {"kind": "binary"}, "beta": 1.0},
            "model": {"variant": "brownian", "sigma2": 1.0},
            "parameters": {"estimator": "survival_tail", "y0": 1.0,
                           "t_values": [5.0], "horizon": 5.0,
                           "exact_stamps": False}}
    data.update(over)
    return write_cfg(tmp_path, "est.json", data)


class TestHappyPaths:
    def test_ode_writes_envelope_and_csv(self, tmp_path):
        out = tmp_path / "out"
        rc = cli.main(["ode", "--config", ode_cfg(tmp_path),
                       "--out", str(out)])
        assert rc == 0
        env = json.loads((out / "result.json").read_text())
        assert env["tool"] == "bkl-lab"
        assert env["seed"] == 5
        assert len(env["config_hash"]) == 64
        assert env["results"]["survival"][0] == pytest.approx(2.0 / 3.0,
                                                              rel=1e-9)
        lines = (out / "ode.csv").read_text().splitlines()
        assert env["config_hash"] in lines[0]
        assert lines[1] == "t,survival"
        assert (out / "run.log").exists()

    def test_simulate_jsonl(self, tmp_path):
        cfg = write_cfg(tmp_path, "sim.json", {
            "mode": "simulate", "seed": 9, "replicas": 50,
            "spec": {"law": {"kind": "binary"}, "beta": 1.0},
            "model": {"variant": "brownian", "sigma2": 1.0},
            "parameters": {"y0": 1.0, "horizon": 5.0}})
        out = tmp_path / "out"
        rc = cli.main(["simulate", "--config", cfg, "--out", str(out)])
        assert rc == 0
        lines = (out / "simulate.jsonl").read_text().splitlines()
        header = json.loads(lines[0])
        assert header["tool"] == "bkl-lab"
        rows = [json.loads(ln) for ln in lines[1:]]
        assert len(rows) == 50
        assert {r["replica"] for r in rows} == set(range(50))
        env = json.loads((out / "result.json").read_text())
        assert env["results"]["extinct"] + env["results"]["censored"] == 50

    def test_shoot_profile(self, tmp_path):
        cfg = write_cfg(tmp_path, "shoot.json", {
            "mode": "shoot",
            "parameters": {"alpha": 2.0, "C": 0.5, "tol": 1e-6}})
        out = tmp_path / "out"
        rc = cli.main(["shoot", "--config", cfg, "--out", str(out)])
        assert rc == 0
        env = json.loads((out / "result.json").read_text())
        assert env["results"]["slope_at_0"] == pytest.approx(33.0822, rel=1e-3)
        assert env["results"]["conservation_drift"] < 1e-6

    def test_emit_plot_data(self, tmp_path):
        cfg = write_cfg(tmp_path, "emit.json", {
            "mode": "emit-plot-data",
            "spec": {"law": {"kind": "binary"}, "beta": 1.0},
            "parameters": {"source": "gw_curve", "t_values": [1.0, 2.0]}})
        out = tmp_path / "out"
        rc = cli.main(["emit-plot-data", "--config", cfg, "--out", str(out)])
        assert rc == 0
        lines = (out / "plot_data.csv").read_text().splitlines()
        assert lines[1] == "x,y,yerr"
        assert len(lines) == 4

    def test_estimate_csv_columns(self, tmp_path):
        out = tmp_path / "out"
        rc = cli.main(["estimate", "--config", estimate_cfg(tmp_path),
                       "--out", str(out)])
        assert rc == 0
        lines = (out / "estimate.csv").read_text().splitlines()
        cols = lines[1].split(",")
        assert cols[0] == "op"
        assert cols[-4:] == ["value", "std_err", "n", "censored_fraction"]
        assert len(lines) == 3


class TestDeterminism:
    def test_identical_runs_are_byte_identical(self, tmp_path):
        cfg = estimate_cfg(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["estimate", "--config", cfg, "--out", str(a)]) == 0
        assert cli.main(["estimate", "--config", cfg, "--out", str(b)]) == 0
        for name in ("result.json", "estimate.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_seed_override_changes_results_and_hash(self, tmp_path):
        cfg = estimate_cfg(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["estimate", "--config", cfg, "--out", str(a)]) == 0
        assert cli.main(["estimate", "--config", cfg, "--out", str(b),
                         "--seed", "77"]) == 0
        ra = json.loads((a / "result.json").read_text())
        rb = json.loads((b / "result.json").read_text())
        assert rb["seed"] == 77
        assert ra["config_hash"] != rb["config_hash"]
        assert (ra["results"]["rows"][0]["value"]
                != rb["results"]["rows"][0]["value"])

    def test_threads_env_does_not_change_output(self, tmp_path, monkeypatch):
        cfg = estimate_cfg(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["estimate", "--config", cfg, "--out", str(a)]) == 0
        monkeypatch.setenv("BKL_THREADS", "4")
        assert cli.main(["estimate", "--config", cfg, "--out", str(b)]) == 0
        assert (a / "result.json").read_bytes() == (b / "result.json").read_bytes()


class TestExitCodes:
    def test_mode_subcommand_mismatch(self, tmp_path, capsys):
        rc = cli.main(["pde", "--config", ode_cfg(tmp_path)])
        assert rc == 3
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["type"] == "ConfigError"

    def test_unknown_parameter_key(self, tmp_path):
        cfg = ode_cfg(tmp_path, parameters={"t_values": [1.0], "bogus": 1})
        assert cli.main(["ode", "--config", cfg]) == 3

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{]")
        assert cli.main(["ode", "--config", str(path)]) == 3

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["ode", "--config", str(tmp_path / "no.json")]) == 3

    def test_unknown_subcommand(self, tmp_path, capsys):
        assert cli.main(["frobnicate", "--config", "x.json"]) == 3
        capsys.readouterr()

    def test_missing_subcommand(self, capsys):
        assert cli.main([]) == 3
        capsys.readouterr()

    def test_bad_threads_env(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("BKL_THREADS", "many")
        assert cli.main(["ode", "--config", ode_cfg(tmp_path)]) == 3
        err = json.loads(capsys.readouterr().err)
        assert "BKL_THREADS" in err["error"]["message"]

    def test_numerical_non_convergence_is_4(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "pde.json", {
            "mode": "pde",
            "parameters": {"alpha": 2.0, "C": 0.5, "T": 0.5, "n_y": 121}})
        rc = cli.main(["pde", "--config", cfg,
                       "--out", str(tmp_path / "out")])
        assert rc == 4
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["code"] == "non_convergence"

    def test_verify_failure_is_2(self, tmp_path, monkeypatch, capsys):
        def fake_pass(seed=0):
            return acceptance.CriterionResult(1, "stub-ok", True, 0.0, 0.0,
                                              "none", 0.0)

        def fake_fail(seed=0):
            return acceptance.CriterionResult(2, "stub-bad", False, 1.0, 0.0,
                                              "none", 0.0)

        monkeypatch.setattr(acceptance, "CRITERIA",
                            {1: fake_pass, 2: fake_fail})
        cfg = write_cfg(tmp_path, "verify.json", {"mode": "verify"})
        out = tmp_path / "out"
        rc = cli.main(["verify", "--config", cfg, "--out", str(out)])
        assert rc == 2
        text = (out / "verify.txt").read_text()
        assert "[PASS] criterion  1" in text
        assert "[FAIL] criterion  2" in text
        capsys.readouterr()

    def test_verify_pass_is_0(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "verify.json",
                        {"mode": "verify", "parameters": {"criteria": [1]}})
        out = tmp_path / "out"
        rc = cli.main(["verify", "--config", cfg, "--out", str(out)])
        assert rc == 0
        env = json.loads((out / "result.json").read_text())
        assert env["results"]["passed"] is True
        assert "runtime_s" not in env["results"]["criteria"][0]
        capsys.readouterr()

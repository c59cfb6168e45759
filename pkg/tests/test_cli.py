import json
from pathlib import Path

import pytest

from dmfpf.cli import apply_overrides, main, run, validate

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small_constants_cfg(tmp_path, **extra):
    cfg = json.loads((CONFIGS / "constants.json").read_text())
    cfg["experiment_params"]["measure_meanfield"] = False
    cfg["experiment_params"]["lipschitz_samples"] = 20000
    cfg.update(extra)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


class TestValidate:
    def test_empty_lists_every_missing_key(self):
        problems = validate({})
        text = "\n".join(problems)
        for key in ("experiment", "seed", "model", "gain", "sim"):
            assert key in text

    def test_zero_epsilon(self):
        cfg = json.loads((CONFIGS / "linear_twin.json").read_text())
        cfg["gain"]["epsilon"] = 0
        assert any("epsilon must be positive" in p for p in validate(cfg))

    def test_assumption2_named(self):
        cfg = json.loads((CONFIGS / "linear_twin.json").read_text())
        cfg["sim"]["delta"] = 0.5
        cfg["sim"]["n_particles"] = 1
        probs = validate(cfg)
        assert any("Assumption 2" in p for p in probs)

    def test_assumption2_satisfied_small(self):
        cfg = json.loads((CONFIGS / "linear_twin.json").read_text())
        cfg["sim"]["delta"] = 0.5
        cfg["sim"]["n_particles"] = 3  # 3 > 1/(4 * 0.125) = 2
        assert not any("Assumption 2" in p for p in validate(cfg))

    def test_catalog_ids_checked(self):
        cfg = json.loads((CONFIGS / "linear_twin.json").read_text())
        cfg["model"]["drift"] = "pendulum"
        assert any("drift" in p for p in validate(cfg))


class TestOverrides:
    def test_dotted_paths_and_json_values(self):
        cfg = {"gain": {"epsilon": 0.5}, "seed": 1}
        out = apply_overrides(cfg, ["gain.epsilon=0.25", "seed=9",
                                    "experiment_params.N_list=[10,20]"])
        assert out["gain"]["epsilon"] == 0.25
        assert out["seed"] == 9
        assert out["experiment_params"]["N_list"] == [10, 20]
        assert cfg["gain"]["epsilon"] == 0.5  # original untouched

    def test_malformed_assignment(self):
        from dmfpf.errors import ConfigError
        with pytest.raises(ConfigError):
            apply_overrides({}, ["no_equals_sign"])


class TestRun:
    def test_constants_run_writes_artifacts(self, tmp_path):
        cfgp = small_constants_cfg(tmp_path)
        out = tmp_path / "out"
        assert run(cfgp, out=out) == 0
        meta = json.loads((out / "meta.json").read_text())
        assert meta["version"]
        assert meta["assumption2_ok"] is True
        report = json.loads((out / "report.json").read_text())
        assert report["K_f"] == 1.0
        assert report["kernel_lipschitz"]["f_pass"] is True

    def test_validation_failure_exits_2(self, tmp_path, capsys):
        cfgp = small_constants_cfg(tmp_path)
        code = run(cfgp, overrides=["sim.delta=2.0"])
        assert code == 2
        assert "delta" in capsys.readouterr().err

    def test_runtime_failure_exits_3(self, tmp_path, capsys):
        cfg = json.loads((CONFIGS / "linear_twin.json").read_text())
        cfg["sim"].update({"horizon": 0.05, "n_particles": 64, "delta": 0.4})
        cfg["gain"].update({"tol": 1e-14, "max_iter": 1})
        cfg["experiment_params"] = {"n_seeds": 1, "sir_particles": 200}
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg))
        code = run(p, out=tmp_path / "out")
        assert code == 3
        assert "IterationError" in capsys.readouterr().err

    def test_missing_seed_rejected(self, tmp_path):
        cfg = json.loads((CONFIGS / "constants.json").read_text())
        del cfg["seed"]
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg))
        assert run(p, out=tmp_path / "o") == 2

    def test_byte_identical_reruns(self, tmp_path):
        cfg = json.loads((CONFIGS / "limit_enkbf.json").read_text())
        cfg["sim"]["n_particles"] = 128
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run(p, out=out1) == 0
        assert run(p, out=out2) == 0
        assert (out1 / "limit.csv").read_bytes() == (out2 / "limit.csv").read_bytes()
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()

    def test_meta_round_trip(self, tmp_path):
        cfg = json.loads((CONFIGS / "limit_enkbf.json").read_text())
        cfg["sim"]["n_particles"] = 96
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg))
        out1 = tmp_path / "a"
        assert run(p, out=out1) == 0
        meta = json.loads((out1 / "meta.json").read_text())
        p2 = tmp_path / "replay.json"
        p2.write_text(json.dumps(meta["config"]))
        out2 = tmp_path / "b"
        assert run(p2, out=out2) == 0
        assert (out1 / "limit.csv").read_bytes() == (out2 / "limit.csv").read_bytes()

    def test_cli_main_validate(self, capsys):
        code = main(["validate", "--config", str(CONFIGS / "linear_twin.json")])
        assert code == 0

    def test_cli_main_run_seed_override(self, tmp_path):
        cfgp = small_constants_cfg(tmp_path)
        code = main(["run", "--config", str(cfgp), "--seed", "7",
                     "--out", str(tmp_path / "o"),
                     "--set", "experiment_params.lipschitz_samples=15000"])
        assert code == 0
        meta = json.loads((tmp_path / "o" / "meta.json").read_text())
        assert meta["config"]["seed"] == 7
        assert meta["config"]["experiment_params"]["lipschitz_samples"] == 15000

    def test_configless_constants_invocation(self, tmp_path):
        code = main(["run", "--experiment", "constants", "--seed", "5",
                     "--out", str(tmp_path / "o"),
                     "--set", "gain.epsilon=0.25",
                     "--set", "experiment_params.d=1",
                     "--set", "experiment_params.lipschitz_samples=15000"])
        assert code == 0
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["K_f"] == 1.0
        assert report["epsilon"] == 0.25

    def test_configless_needs_experiment(self, capsys):
        assert run(None) == 2
        assert "experiment" in capsys.readouterr().err


class TestCsvSchemas:
    """The CSV column sets are versioned; these headers are frozen."""

    HEADERS = {
        "filter.csv": ("t,truth_1,mean_fpf_1,mean_enkbf_1,mean_kb_1,mean_sir_1,"
                       "var_fpf_1,var_enkbf_1,var_kb_1,var_sir_1,"
                       "monitor_min_q,residual"),
        "gain.csv": "x_1,K_exact,K_dm,K_const,epsilon",
        "poc.csv": "N,rep,sup_D,zeta_hat",
        "bounds.csv": ("epsilon,c_v,c_g,bound1,measured_sup_K,bound2,"
                       "measured_sup_gradK"),
        "limit.csv": "multiplier,epsilon,mean_dm_gain,const_gain,rel_gap",
        "lln.csv": "N,rep,gap_sq",
    }

    def first_line(self, path):
        return path.read_text().splitlines()[0]

    def test_headers_frozen(self, tmp_path):
        runs = [
            ("linear_twin.json", "filter.csv",
             ["sim.horizon=0.05", "sim.n_particles=32", "sim.delta=0.4",
              "experiment_params.sir_particles=500"]),
            ("gain_eval.json", "gain.csv",
             ["sim.n_particles=64", "experiment_params.n_query=5",
              "experiment_params.epsilons=[0.5]"]),
            ("poc.json", "poc.csv",
             ["sim.horizon=0.04", "sim.dt=0.02", "sim.delta=0.2",
              "sim.n_particles=64",
              "experiment_params.N_list=[4,6,8]", "experiment_params.M_ref=64",
              "experiment_params.reps=1"]),
            ("bounds.json", "bounds.csv", ["experiment_params.grid_n=401"]),
            ("limit_enkbf.json", "limit.csv", ["sim.n_particles=32"]),
            ("lln.json", "lln.csv",
             ["sim.delta=0.2", "sim.n_particles=64",
              "experiment_params.N_list=[4,6,8]", "experiment_params.M_ref=64",
              "experiment_params.reps=2"]),
        ]
        for cfg_name, artifact, overrides in runs:
            out = tmp_path / artifact
            out.mkdir()
            code = run(CONFIGS / cfg_name, overrides=overrides, out=out)
            assert code == 0, f"{cfg_name} failed"
            assert self.first_line(out / artifact) == self.HEADERS[artifact]

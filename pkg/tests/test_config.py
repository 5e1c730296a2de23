import json

import pytest

from bkl_lab.config import ExperimentConfig, MODES
from bkl_lab.errors import ConfigError
from bkl_lab.levy_motion import BrownianMotion, JumpDiffusion
from bkl_lab.offspring import make_binary


def base_dict(**over):
    data = {"mode": "simulate",
            "spec": {"law": {"kind": "binary"}, "beta": 1.0},
            "model": {"variant": "brownian", "sigma2": 1.0},
            "parameters": {"y0": 1.0, "horizon": 10.0},
            "seed": 42, "replicas": 100}
    data.update(over)
    return data


class TestSchema:
    def test_round_trip(self):
        cfg = ExperimentConfig.from_dict(base_dict())
        assert cfg.mode == "simulate"
        assert cfg.seed == 42
        assert cfg.replicas == 100
        assert cfg.spec.law == make_binary()
        assert isinstance(cfg.model, BrownianMotion)
        again = ExperimentConfig.from_dict(cfg.canonical())
        assert again.hash() == cfg.hash()

    def test_jump_diffusion_round_trip(self):
        data = base_dict(model={"variant": "jump_diffusion", "sigma2": 0.5,
                                "jump_rate": 1.0,
                                "jump": {"kind": "laplace", "scale": 0.5,
                                         "declared_moment_order": 100.0}})
        cfg = ExperimentConfig.from_dict(data)
        assert isinstance(cfg.model, JumpDiffusion)
        again = ExperimentConfig.from_dict(cfg.canonical())
        assert again.hash() == cfg.hash()

    def test_stable_spec_round_trip(self):
        data = base_dict(spec={"law": {"kind": "stable", "alpha": 1.5,
                                       "scale": 0.5}})
        cfg = ExperimentConfig.from_dict(data)
        assert cfg.spec.law.tail_alpha == pytest.approx(1.5)
        again = ExperimentConfig.from_dict(cfg.canonical())
        assert again.hash() == cfg.hash()

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            ExperimentConfig.from_dict(base_dict(typo=1))

    def test_unknown_mode(self):
        with pytest.raises(ConfigError, match="mode must be one of"):
            ExperimentConfig.from_dict(base_dict(mode="destroy"))

    def test_missing_mode(self):
        with pytest.raises(ConfigError, match="needs a mode"):
            ExperimentConfig.from_dict({"seed": 1})

    @pytest.mark.parametrize("mode,bad", [
        ("simulate", "levels"),
        ("ode", "y0"),
        ("shoot", "t_values"),
        ("verify", "estimator"),
    ])
    def test_parameter_keys_are_mode_specific(self, mode, bad):
        data = {"mode": mode, "parameters": {bad: 1}}
        if mode in ("simulate", "ode"):
            data["spec"] = {"law": {"kind": "binary"}}
        if mode == "simulate":
            data["model"] = {"variant": "brownian", "sigma2": 1.0}
        with pytest.raises(ConfigError, match="unknown parameters"):
            ExperimentConfig.from_dict(data)

    def test_simulate_requires_spec_and_model(self):
        with pytest.raises(ConfigError, match="needs a spec"):
            ExperimentConfig.from_dict(base_dict(spec=None))
        with pytest.raises(ConfigError, match="needs a model"):
            ExperimentConfig.from_dict(base_dict(model=None))

    @pytest.mark.parametrize("key", ["seed", "replicas", "threads"])
    def test_integer_fields_reject_non_integers(self, key):
        with pytest.raises(ConfigError, match="must be an integer"):
            ExperimentConfig.from_dict(base_dict(**{key: "7"}))
        with pytest.raises(ConfigError, match="must be an integer"):
            ExperimentConfig.from_dict(base_dict(**{key: True}))

    def test_replicas_must_be_positive(self):
        with pytest.raises(ConfigError, match="replicas"):
            ExperimentConfig.from_dict(base_dict(replicas=0))

    def test_bad_spec_shape(self):
        with pytest.raises(ConfigError, match="unknown spec keys"):
            ExperimentConfig.from_dict(
                base_dict(spec={"law": {"kind": "binary"}, "mean": 2}))

    def test_every_mode_constructs(self):
        for mode in MODES:
            data = {"mode": mode}
            if mode in ("simulate", "ode"):
                data["spec"] = {"law": {"kind": "binary"}}
            if mode == "simulate":
                data["model"] = {"variant": "brownian", "sigma2": 1.0}
            assert ExperimentConfig.from_dict(data).mode == mode


class TestHashing:
    def test_hash_is_stable_across_instances(self):
        a = ExperimentConfig.from_dict(base_dict())
        b = ExperimentConfig.from_dict(base_dict())
        assert a.hash() == b.hash()
        assert len(a.hash()) == 64

    def test_hash_tracks_content(self):
        a = ExperimentConfig.from_dict(base_dict())
        b = ExperimentConfig.from_dict(base_dict(seed=43))
        c = ExperimentConfig.from_dict(
            base_dict(parameters={"y0": 2.0, "horizon": 10.0}))
        assert len({a.hash(), b.hash(), c.hash()}) == 3

    def test_threads_and_output_do_not_change_hash(self):
        a = ExperimentConfig.from_dict(base_dict())
        b = ExperimentConfig.from_dict(
            base_dict(threads=8, output="elsewhere"))
        assert a.hash() == b.hash()

    def test_canonical_is_json_serializable(self):
        cfg = ExperimentConfig.from_dict(base_dict())
        json.dumps(cfg.canonical(), sort_keys=True)


class TestOverridesAndIO:
    def test_with_overrides(self):
        cfg = ExperimentConfig.from_dict(base_dict(threads=3))
        out = cfg.with_overrides(seed=7, output="elsewhere")
        assert out.seed == 7
        assert out.output == "elsewhere"
        assert out.threads == 3
        assert out.replicas == cfg.replicas
        assert cfg.with_overrides() is cfg

    def test_load(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(base_dict()))
        cfg = ExperimentConfig.load(path)
        assert cfg.seed == 42

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            ExperimentConfig.load(tmp_path / "nope.json")

    def test_load_malformed_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{mode:")
        with pytest.raises(ConfigError, match="not valid JSON"):
            ExperimentConfig.load(path)

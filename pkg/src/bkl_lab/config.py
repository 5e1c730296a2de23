"""Experiment configuration: strict schema, canonical hashing, file I/O.

A config is plain JSON. Top-level keys and per-mode parameter keys are
closed sets; anything unrecognized is a ConfigError so that typos cannot
silently change an experiment. The sha256 of the canonical (sorted,
compact) JSON form is stamped into every artifact a run writes.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any

from .errors import ConfigError
from .levy_motion import LevyModel, model_from_json, model_to_json
from .offspring import BranchingSpec, OffspringLaw

MODES = ("simulate", "ode", "pde", "shoot", "estimate", "verify",
         "emit-plot-data")

_TOP_KEYS = {"mode", "spec", "model", "parameters", "seed", "replicas",
             "output", "threads"}

_COMMON_ENSEMBLE_KEYS = {"y0", "horizon", "snapshot_times", "levels",
                         "exact_max", "exact_stamps", "max_events", "chunk"}
_PARAM_KEYS = {
    "simulate": {"y0", "horizon", "snapshot_times", "max_events"},
    "ode": {"t_values"},
    "pde": {"problem", "alpha", "C", "sigma2", "T", "store_times", "n_y",
            "y_max", "dt_max", "level"},
    "shoot": {"alpha", "C", "sigma2", "tol", "blowup_at"},
    "estimate": _COMMON_ENSEMBLE_KEYS | {"estimator", "y_mode", "y",
                                         "t_values", "x_values", "statistic",
                                         "t", "alpha"},
    "verify": {"criteria"},
    "emit-plot-data": _COMMON_ENSEMBLE_KEYS | {"source", "y_mode", "y",
                                               "t_values", "x_values",
                                               "alpha", "C", "sigma2", "T",
                                               "tol"},
}

_NEEDS_SPEC = {"simulate", "ode"}
_NEEDS_MODEL = {"simulate"}


def _require(cond: bool, msg: str, **ctx: Any) -> None:
    if not cond:
        raise ConfigError(msg, **ctx)


def spec_from_obj(data: dict) -> BranchingSpec:
    _require(isinstance(data, dict), "spec must be an object")
    extra = set(data) - {"law", "beta"}
    _require(not extra, f"unknown spec keys {sorted(extra)}")
    _require("law" in data, "spec needs a law")
    try:
        law = OffspringLaw.from_json(json.dumps(data["law"]))
        return BranchingSpec(law=law, beta=float(data.get("beta", 1.0)))
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad branching spec: {exc}") from exc


def spec_to_obj(spec: BranchingSpec) -> dict:
    return {"law": json.loads(spec.law.to_json()), "beta": spec.beta}


def model_from_obj(data: dict) -> LevyModel:
    try:
        return model_from_json(data)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad motion model: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    seed: int = 0
    replicas: int = 1
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    spec: BranchingSpec | None = None
    model: LevyModel | None = None
    parameters: dict = field(default_factory=dict)
    output: str | None = None

    def __post_init__(self):
        _require(self.mode in MODES,
                 f"mode must be one of {MODES}, got {self.mode!r}")
        _require(-(2 ** 63) <= int(self.seed) < 2 ** 63,
                 "seed must fit in 64 bits")
        _require(self.replicas >= 1, "replicas must be positive")
        _require(self.threads >= 1, "threads must be positive")
        extra = set(self.parameters) - _PARAM_KEYS[self.mode]
        _require(not extra,
                 f"unknown parameters for mode {self.mode}: {sorted(extra)}")
        if self.mode in _NEEDS_SPEC:
            _require(self.spec is not None, f"mode {self.mode} needs a spec")
        if self.mode in _NEEDS_MODEL:
            _require(self.model is not None, f"mode {self.mode} needs a model")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        _require(isinstance(data, dict), "config must be a JSON object")
        extra = set(data) - _TOP_KEYS
        _require(not extra, f"unknown config keys {sorted(extra)}")
        _require("mode" in data, "config needs a mode")
        kwargs: dict[str, Any] = {"mode": data["mode"]}
        if "spec" in data and data["spec"] is not None:
            kwargs["spec"] = spec_from_obj(data["spec"])
        if "model" in data and data["model"] is not None:
            kwargs["model"] = model_from_obj(data["model"])
        if "parameters" in data:
            _require(isinstance(data["parameters"], dict),
                     "parameters must be an object")
            kwargs["parameters"] = dict(data["parameters"])
        for key in ("seed", "replicas", "threads"):
            if key in data:
                _require(isinstance(data[key], int) and not
                         isinstance(data[key], bool),
                         f"{key} must be an integer")
                kwargs[key] = data[key]
        if "output" in data and data["output"] is not None:
            kwargs["output"] = str(data["output"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", path=str(path))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}",
                              path=str(path))
        return cls.from_dict(data)

    def canonical(self) -> dict:
        """Plain-data form used for hashing and artifacts.

        Excludes threads and the output directory: neither changes
        results, so neither may change the hash.
        """
        return {
            "mode": self.mode,
            "seed": self.seed,
            "replicas": self.replicas,
            "spec": None if self.spec is None else spec_to_obj(self.spec),
            "model": None if self.model is None else model_to_json(self.model),
            "parameters": self.parameters,
        }

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True,
                          separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_overrides(self, seed: int | None = None,
                       output: str | None = None) -> "ExperimentConfig":
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = seed
        if output is not None:
            changes["output"] = output
        if not changes:
            return self
        base = self.canonical()
        base["threads"] = self.threads
        base["output"] = self.output
        base.update(changes)
        return ExperimentConfig.from_dict(base)

"""Experiment configuration: YAML schema, validation with key-path
diagnostics, compiled-in reproduction presets, and construction of the
environment/basis/learner objects an experiment needs."""
from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import yaml

from . import basis as basis_mod
from . import envs as envs_mod
from .harness import GenerationConfig, routing_seed
from .learners import LearningRateSchedule, SensorNoiseMethod

ENV_KINDS = ("cartpole", "cashier", "carhill")
LEARNER_KINDS = ("KFQL", "AKFQL", "PTD")
NOISE_METHODS = ("policy", "average", "max", "boltzmann")
PRIOR_MEAN_NAMES = ("summit-ramp",)


class ConfigError(ValueError):
    """Invalid configuration; message names the offending key path."""


@dataclass
class LearnerSpec:
    kind: str
    noise_method: str = "max"
    noise_tau: float = 1.0
    epsilon0: float = 0.1
    prior_mean: float | str | list = 0.0
    prior_variance: float = 1.0
    rate_s: Optional[float] = None  # PTD only
    rate_c: Optional[float] = None
    tau_act: float = 2.0
    gamma: float = 1.0
    budget: int = 100_000
    snapshots: Optional[list] = None


@dataclass
class EnvironmentSpec:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    name: str
    environment: EnvironmentSpec
    learners: list
    runs: int = 10
    trials: int = 5
    eval_horizon: Optional[int] = None  # default: environment's cap
    eval_gamma: Optional[float] = None
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


_LEARNER_KEYS = {f for f in LearnerSpec.__dataclass_fields__}
_ENV_KEYS = {f for f in EnvironmentSpec.__dataclass_fields__}
_TOP_KEYS = {f for f in ExperimentConfig.__dataclass_fields__}

_ENV_PARAM_KEYS = {
    "cartpole": {f for f in envs_mod.CartPoleParams.__dataclass_fields__},
    "cashier": {f for f in envs_mod.CashierParams.__dataclass_fields__},
    "carhill": {f for f in envs_mod.CarHillParams.__dataclass_fields__},
}


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _check_keys(mapping: dict, allowed: set, path: str) -> None:
    _require(isinstance(mapping, dict), path, "expected a mapping")
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key (expected one of "
                              f"{sorted(allowed)})")


def _number(value, path: str, *, minimum=None, allow_none=False):
    if value is None and allow_none:
        return None
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             path, f"expected a number, got {value!r}")
    _require(math.isfinite(value), path, "must be finite")
    if minimum is not None:
        _require(value >= minimum, path, f"must be >= {minimum}")
    return value


def parse_config_dict(raw: dict, name: str = "config") -> ExperimentConfig:
    _require(isinstance(raw, dict) and raw, "<root>",
             "expected a mapping with keys: environment, learners "
             "(optional: name, runs, trials, eval_horizon, eval_gamma, seed)")
    _check_keys(raw, _TOP_KEYS, "<root>")
    _require("environment" in raw, "<root>", "missing required key 'environment'")
    _require("learners" in raw, "<root>", "missing required key 'learners'")

    env_raw = raw["environment"]
    _check_keys(env_raw, _ENV_KEYS, "environment")
    _require("kind" in env_raw, "environment", "missing required key 'kind'")
    kind = env_raw["kind"]
    _require(kind in ENV_KINDS, "environment.kind",
             f"must be one of {ENV_KINDS}, got {kind!r}")
    params = env_raw.get("params") or {}
    _check_keys(params, _ENV_PARAM_KEYS[kind], "environment.params")
    env_spec = EnvironmentSpec(kind, copy.deepcopy(params))

    learners_raw = raw["learners"]
    _require(isinstance(learners_raw, list) and learners_raw, "learners",
             "expected a non-empty list")
    learners = []
    for i, spec in enumerate(learners_raw):
        path = f"learners.{i}"
        _check_keys(spec, _LEARNER_KEYS, path)
        _require("kind" in spec, path, "missing required key 'kind'")
        _require(spec["kind"] in LEARNER_KINDS, f"{path}.kind",
                 f"must be one of {LEARNER_KINDS}")
        ls = LearnerSpec(kind=spec["kind"])
        for key, value in spec.items():
            setattr(ls, key, value)
        _validate_learner(ls, path, env_spec)
        learners.append(ls)

    config = ExperimentConfig(
        name=str(raw.get("name", name)),
        environment=env_spec,
        learners=learners,
        runs=int(_number(raw.get("runs", 10), "runs", minimum=1)),
        trials=int(_number(raw.get("trials", 5), "trials", minimum=1)),
        eval_horizon=raw.get("eval_horizon"),
        eval_gamma=raw.get("eval_gamma"),
        seed=int(_number(raw.get("seed", 0), "seed", minimum=0)),
    )
    if config.eval_horizon is not None:
        config.eval_horizon = int(_number(config.eval_horizon, "eval_horizon",
                                          minimum=1))
    if config.eval_gamma is not None:
        _number(config.eval_gamma, "eval_gamma", minimum=0.0)
    return config


def _validate_learner(ls: LearnerSpec, path: str, env: EnvironmentSpec) -> None:
    _require(ls.noise_method in NOISE_METHODS, f"{path}.noise_method",
             f"must be one of {NOISE_METHODS}")
    _number(ls.noise_tau, f"{path}.noise_tau", minimum=0.0)
    _require(ls.noise_tau > 0, f"{path}.noise_tau", "must be > 0")
    _number(ls.epsilon0, f"{path}.epsilon0", minimum=0.0)
    _number(ls.prior_variance, f"{path}.prior_variance", minimum=0.0)
    _number(ls.tau_act, f"{path}.tau_act", minimum=0.0)
    _require(ls.tau_act > 0, f"{path}.tau_act", "must be > 0")
    _number(ls.gamma, f"{path}.gamma", minimum=0.0)
    _require(ls.gamma <= 1.0, f"{path}.gamma", "must be <= 1")
    _number(ls.budget, f"{path}.budget", minimum=0)
    ls.budget = int(ls.budget)
    if isinstance(ls.prior_mean, str):
        _require(ls.prior_mean in PRIOR_MEAN_NAMES, f"{path}.prior_mean",
                 f"named priors: {PRIOR_MEAN_NAMES}")
        _require(env.kind == "carhill", f"{path}.prior_mean",
                 "'summit-ramp' applies only to the carhill environment")
    elif isinstance(ls.prior_mean, list):
        expected = _basis_size(env)
        _require(len(ls.prior_mean) == expected, f"{path}.prior_mean",
                 f"expected {expected} entries for this basis")
        for j, v in enumerate(ls.prior_mean):
            _number(v, f"{path}.prior_mean.{j}")
    else:
        _number(ls.prior_mean, f"{path}.prior_mean")
    if ls.kind == "PTD":
        _require(ls.rate_s is not None and ls.rate_c is not None,
                 f"{path}", "PTD requires rate_s and rate_c")
        _number(ls.rate_s, f"{path}.rate_s", minimum=0.0)
        _number(ls.rate_c, f"{path}.rate_c", minimum=0.0)
        _require(ls.rate_s > 0 and ls.rate_c > 0, f"{path}.rate_s",
                 "rate parameters must be > 0")
    if ls.snapshots is not None:
        _require(isinstance(ls.snapshots, list) and ls.snapshots,
                 f"{path}.snapshots", "expected a non-empty list")
        pts = [int(_number(p, f"{path}.snapshots.{j}", minimum=0))
               for j, p in enumerate(ls.snapshots)]
        _require(pts == sorted(pts), f"{path}.snapshots", "must be sorted")
        _require(pts[-1] <= ls.budget, f"{path}.snapshots",
                 "points must not exceed the budget")
        ls.snapshots = pts


def _basis_size(env: EnvironmentSpec) -> int:
    if env.kind == "cartpole":
        return basis_mod.cartpole_grid().n
    if env.kind == "carhill":
        return basis_mod.carhill_grid().n
    return int(env.params.get("d", 100))


def parse_config(text: str, name: str = "config") -> ExperimentConfig:
    """Parse and validate a YAML experiment config."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML syntax error: {exc}") from exc
    if raw is None:
        raise ConfigError("<root>: empty config; required keys: "
                          "environment (with kind), learners")
    return parse_config_dict(raw, name)


def serialize_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=True)


def build_environment(config: ExperimentConfig):
    """Instantiate (env, basis) for the config; the cashier routing matrix
    is derived from the experiment seed so trajectories are replayable."""
    kind = config.environment.kind
    params = config.environment.params
    if kind == "cartpole":
        env = envs_mod.CartPoleEnv(envs_mod.CartPoleParams(**params))
        return env, basis_mod.GridBasis(basis_mod.cartpole_grid(), env.basis_coords)
    if kind == "carhill":
        env = envs_mod.CarHillEnv(envs_mod.CarHillParams(**params))
        return env, basis_mod.GridBasis(basis_mod.carhill_grid(), env.basis_coords)
    cparams = envs_mod.CashierParams(**params)
    rng = np.random.default_rng(routing_seed(config.seed))
    routing = envs_mod.random_routing(cparams.d, rng)
    env = envs_mod.CashierEnv(routing, cparams)
    return env, basis_mod.CashierBasis(basis_mod.CashierBasisSpec(routing))


def resolve_prior_mean(ls: LearnerSpec, env_kind: str, n: int) -> np.ndarray:
    if isinstance(ls.prior_mean, str):
        return basis_mod.carhill_prior_mean(basis_mod.carhill_grid())
    if isinstance(ls.prior_mean, list):
        return np.asarray(ls.prior_mean, dtype=np.float64)
    return np.full(n, float(ls.prior_mean))


def generation_config(ls: LearnerSpec, env_kind: str, n: int) -> GenerationConfig:
    noise = SensorNoiseMethod(ls.noise_method, ls.epsilon0, ls.noise_tau)
    schedule = None
    if ls.kind == "PTD":
        schedule = LearningRateSchedule(ls.rate_s, ls.rate_c)
    return GenerationConfig(
        learner=ls.kind,
        noise=noise,
        prior_mean=resolve_prior_mean(ls, env_kind, n),
        prior_variance=ls.prior_variance,
        schedule=schedule,
        tau_act=ls.tau_act,
        gamma=ls.gamma,
        budget=ls.budget,
        snapshot_points=tuple(ls.snapshots) if ls.snapshots else None,
    )


# ---------------------------------------------------------------------------
# compiled-in reproduction presets (hyperparameters from the benchmark
# write-ups; budgets sized for desk-scale reruns)

PRESETS: dict = {
    "cartpole-paper": {
        "name": "cartpole-paper",
        "environment": {"kind": "cartpole"},
        "runs": 10,
        "trials": 5,
        "seed": 20240601,
        "learners": [
            {"kind": "AKFQL", "noise_method": "max", "epsilon0": 0.1,
             "prior_mean": 0.0, "prior_variance": 10000.0,
             "gamma": 1.0, "budget": 200000},
            {"kind": "KFQL", "noise_method": "max", "epsilon0": 0.1,
             "prior_mean": 0.0, "prior_variance": 10000.0,
             "gamma": 1.0, "budget": 200000},
            {"kind": "PTD", "rate_s": 0.5, "rate_c": 1.0e6,
             "prior_mean": 0.0, "gamma": 1.0, "budget": 200000},
        ],
    },
    "cashier-paper": {
        "name": "cashier-paper",
        "environment": {"kind": "cashier"},
        "runs": 10,
        "trials": 5,
        "seed": 20240602,
        "learners": [
            {"kind": "AKFQL", "noise_method": "max", "epsilon0": 1.0,
             "prior_mean": 0.0, "prior_variance": 20.0, "tau_act": 500.0,
             "gamma": 0.99, "budget": 100000},
            {"kind": "KFQL", "noise_method": "max", "epsilon0": 1.0,
             "prior_mean": 0.0, "prior_variance": 20.0, "tau_act": 500.0,
             "gamma": 0.99, "budget": 100000},
            {"kind": "PTD", "rate_s": 0.1, "rate_c": 1.0e3, "tau_act": 500.0,
             "prior_mean": 0.0, "gamma": 0.99, "budget": 100000},
        ],
    },
    "carhill-paper": {
        "name": "carhill-paper",
        "environment": {"kind": "carhill"},
        "runs": 10,
        "trials": 5,
        "seed": 20240603,
        "learners": [
            {"kind": "AKFQL", "noise_method": "max", "epsilon0": 0.5,
             "prior_mean": "summit-ramp", "prior_variance": 0.1,
             "tau_act": 0.02, "gamma": 0.999, "budget": 500000},
            {"kind": "KFQL", "noise_method": "max", "epsilon0": 0.5,
             "prior_mean": "summit-ramp", "prior_variance": 0.1,
             "tau_act": 0.02, "gamma": 0.999, "budget": 500000},
            {"kind": "PTD", "rate_s": 0.1, "rate_c": 1.0e3, "tau_act": 0.02,
             "prior_mean": "summit-ramp", "gamma": 0.999, "budget": 500000},
        ],
    },
    "smoke": {
        "name": "smoke",
        "environment": {"kind": "cartpole"},
        "runs": 2,
        "trials": 2,
        "eval_horizon": 200,
        "seed": 7,
        "learners": [
            {"kind": "AKFQL", "epsilon0": 0.1, "prior_variance": 10000.0,
             "gamma": 1.0, "budget": 500, "snapshots": [0, 250, 500]},
            {"kind": "PTD", "rate_s": 0.5, "rate_c": 1.0e6,
             "gamma": 1.0, "budget": 500, "snapshots": [0, 250, 500]},
        ],
    },
}


def preset_names() -> list:
    return sorted(PRESETS)


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {preset_names()}")
    return parse_config_dict(copy.deepcopy(PRESETS[name]), name)

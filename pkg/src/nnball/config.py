"""TOML run configuration: schema, model specs and canonical hashing.

Example::

    experiment = "gumbel"
    model = "uniform1d"          # or "power1d:theta=2", or a [model] table
    n_values = [256, 1024]
    seed = 42

    [thresholds]
    ks = 0.05

    [conditions]
    delta = 0.05
    cone_a = [0.01, 0.1]
"""
from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import (
    DistributionModel,
    IsotropicGaussian,
    MirrorPowerCdf1D,
    PowerCdf1D,
    Uniform1D,
    UniformSquare2D,
)
from .simulate import DEFAULT_Y_GRID, EXPERIMENTS, MODES, ExperimentConfig, Thresholds

__all__ = [
    "ConfigError",
    "MODELS",
    "DEFAULT_N",
    "parse_model",
    "model_spec",
    "parse_config",
    "build_config",
    "config_to_dict",
    "config_hash",
]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


MODELS = {
    "uniform1d": (Uniform1D, {"a": float, "b": float}),
    "power1d": (PowerCdf1D, {"theta": float}),
    "mirrorpower1d": (MirrorPowerCdf1D, {"theta": float}),
    "uniformsquare2d": (UniformSquare2D, {}),
    "gaussian": (IsotropicGaussian, {"d": int, "sigma": float}),
}

# n used when neither the config nor the command line gives one
DEFAULT_N = {
    "gumbel": (64, 256, 1024, 4096),
    "poisson_count": (4096,),
    "tail_bound": (64, 256, 1024),
    "poissonized_tail": (256, 1024),
    "mean_bound": (4096,),
    "factorial_moments": (4096,),
    "pit": (2,),
    "conditions": (2,),
    "kernels": (2,),
}

_TOP_KEYS = {"experiment", "mode", "model", "n_values", "y_grid", "trials", "seed",
             "threads", "k_max", "pit_m", "thresholds", "conditions"}
_COND_KEYS = {"delta": "delta", "gamma_d": "gamma_d", "cone_a": "cone_a",
              "trials": "condition_trials"}
_THRESHOLD_KEYS = {f.name for f in fields(Thresholds)}


def _num(value, key, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite")
    return value


def _num_list(value, key, kind=float):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key}: expected a non-empty list of numbers")
    return tuple(_num(v, f"{key}[{i}]", kind) for i, v in enumerate(value))


def parse_model(spec) -> DistributionModel:
    """Build a model from ``"name"``, ``"name:k=v,k=v"`` or a ``{name = ..., k = v}`` table."""
    if isinstance(spec, str):
        name, _, rest = spec.strip().partition(":")
        params = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            k, eq, v = item.partition("=")
            if not eq:
                raise ConfigError(f"model: expected key=value, got {item!r}")
            try:
                params[k.strip()] = float(v)
            except ValueError:
                raise ConfigError(f"model.{k.strip()}: not a number: {v.strip()!r}") from None
    elif isinstance(spec, dict):
        params = dict(spec)
        name = params.pop("name", None)
        if not isinstance(name, str):
            raise ConfigError("model.name: required string")
    else:
        raise ConfigError("model: expected a string or a table")
    name = name.strip().lower()
    if name not in MODELS:
        raise ConfigError(f"model: unknown model {name!r}; expected one of {sorted(MODELS)}")
    cls, schema = MODELS[name]
    kwargs = {}
    for k, v in params.items():
        if k not in schema:
            raise ConfigError(f"model.{k}: unknown parameter for {name}")
        kwargs[k] = _num(v, f"model.{k}", schema[k])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from None


def model_spec(model: DistributionModel) -> str:
    """Inverse of :func:`parse_model` for string specs."""
    params = model.params()
    if not params:
        return model.name
    return model.name + ":" + ",".join(f"{k}={v!r}" for k, v in params.items())


def _experiment_name(value) -> str:
    if not isinstance(value, str):
        raise ConfigError("experiment: expected a string")
    name = value.strip().replace("-", "_")
    name = {"moments": "factorial_moments"}.get(name, name)
    if name not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown experiment {value!r}")
    return name


def build_config(raw: dict) -> ExperimentConfig:
    """Validate a parsed TOML document and apply defaults."""
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    experiment = _experiment_name(raw.get("experiment", "gumbel"))
    mode = raw.get("mode", "poissonized" if experiment == "poissonized_tail" else "fixed_n")
    if mode not in MODES:
        raise ConfigError(f"mode: expected one of {MODES}, got {mode!r}")
    kw = {"experiment": experiment, "mode": mode,
          "model": parse_model(raw.get("model", "uniform1d"))}

    if "n_values" in raw:
        kind = int if mode == "fixed_n" else float
        n_values = _num_list(raw["n_values"], "n_values", kind)
        for n in n_values:
            if mode == "fixed_n" and n < 2:
                raise ConfigError("n_values: n must be >= 2")
            if not n > 0:
                raise ConfigError("n_values: n must be > 0")
        kw["n_values"] = n_values
    else:
        kw["n_values"] = DEFAULT_N[experiment]
    kw["y_grid"] = _num_list(raw["y_grid"], "y_grid") if "y_grid" in raw else DEFAULT_Y_GRID

    for key in ("trials", "threads", "k_max", "pit_m"):
        if key in raw:
            kw[key] = _num(raw[key], key, int)
    if kw.get("trials", 1) < 1:
        raise ConfigError("trials: must be >= 1")
    if kw.get("threads", 1) < 1:
        raise ConfigError("threads: must be >= 1")
    if kw.get("pit_m", 1) < 1:
        raise ConfigError("pit_m: must be >= 1")
    if not 1 <= kw.get("k_max", 1) <= 4:
        raise ConfigError("k_max: must lie in 1..4")
    if "seed" in raw:
        seed = _num(raw["seed"], "seed", int)
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")
        kw["seed"] = seed

    th = raw.get("thresholds", {})
    if not isinstance(th, dict):
        raise ConfigError("thresholds: expected a table")
    for k in th:
        if k not in _THRESHOLD_KEYS:
            raise ConfigError(f"thresholds.{k}: unknown key")
    kw["thresholds"] = Thresholds(**{k: _num(v, f"thresholds.{k}") for k, v in th.items()})

    cond = raw.get("conditions", {})
    if not isinstance(cond, dict):
        raise ConfigError("conditions: expected a table")
    for k, v in cond.items():
        if k not in _COND_KEYS:
            raise ConfigError(f"conditions.{k}: unknown key")
        if k == "cone_a":
            a = _num_list(v, "conditions.cone_a")
            if any(not 0 < x <= 1 for x in a):
                raise ConfigError("conditions.cone_a: values must lie in (0, 1]")
            kw["cone_a"] = a
        elif k == "trials":
            kw["condition_trials"] = _num(v, "conditions.trials", int)
            if kw["condition_trials"] < 1:
                raise ConfigError("conditions.trials: must be >= 1")
        else:
            kw[_COND_KEYS[k]] = _num(v, f"conditions.{k}")
    if not 0 < kw.get("delta", 0.05) < 1:
        raise ConfigError("conditions.delta: must lie in (0, 1)")
    if kw.get("gamma_d") is not None and not kw["gamma_d"] > 0:
        raise ConfigError("conditions.gamma_d: must be positive")

    try:
        return ExperimentConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config: no such file: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: malformed TOML: {exc}") from None
    return build_config(raw)


def config_to_dict(config: ExperimentConfig) -> dict:
    """Plain-data form of a config; feeding it to :func:`build_config` round-trips."""
    return {
        "experiment": config.experiment,
        "mode": config.mode,
        "model": model_spec(config.model),
        "n_values": list(config.n_values),
        "y_grid": list(config.y_grid),
        "trials": config.trials,
        "seed": config.seed,
        "threads": config.threads,
        "k_max": config.k_max,
        "pit_m": config.pit_m,
        "thresholds": asdict(config.thresholds),
        "conditions": {
            "delta": config.delta,
            "cone_a": list(config.cone_a),
            "trials": config.condition_trials,
            **({} if config.gamma_d is None else {"gamma_d": config.gamma_d}),
        },
    }


def config_hash(effective: dict) -> str:
    """sha256 of canonical JSON.  ``threads`` is excluded since it never changes results."""
    def strip(obj):
        if isinstance(obj, dict):
            return {k: strip(v) for k, v in obj.items() if k != "threads"}
        if isinstance(obj, list):
            return [strip(v) for v in obj]
        return obj

    text = json.dumps(strip(effective), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()

"""Experiment configuration files (YAML) with strict key checking.

Unknown keys, wrong types and out-of-range values are reported with the
line number where they occur.  See README.md for the full key list.
"""
from dataclasses import dataclass, field
from typing import Optional

import yaml

from .errors import ConfigurationError
from .mixture import GaussianMixture, reward_from_dict

# section -> allowed keys; None means the value is a leaf
SCHEMA = {
    "seed": None,
    "output_dir": None,
    "data_mixture": None,
    "classes": None,
    "priors": None,
    "label": None,
    "reward": None,
    "anchor_betas": None,
    "target_betas": None,
    "schedule": {"kind", "T", "beta_min", "beta_max", "cosine_s", "max_beta"},
    "sampler": {"num_inference_steps", "guidance_scale", "eta", "batch_size", "chunk_size", "lambda",
                "record_trajectory"},
    "eval": {"distance_cap", "bootstrap"},
    "bo": {"budget", "n_init", "acquisition", "delta", "grid_points", "batch_per_eval", "anchor_beta",
           "signal_var", "length_scale", "noise_var", "objective", "parabola_center", "noise_sd"},
    "oracle": {"tuples", "grid_points", "n_sd", "tol", "compose_trials"},
}

DEFAULTS = {
    "seed": 0,
    "output_dir": "out",
    "label": None,
    "schedule": {"kind": "linear_beta", "T": 1000, "beta_min": 1e-4, "beta_max": 0.02,
                 "cosine_s": 0.008, "max_beta": 0.999},
    "sampler": {"num_inference_steps": 200, "guidance_scale": 1.0, "eta": 1.0, "batch_size": 10000,
                "chunk_size": 8192, "lambda": 1.0, "record_trajectory": False},
    "eval": {"distance_cap": 20000, "bootstrap": 10000},
    "bo": {"budget": 15, "n_init": 4, "acquisition": "ei", "delta": 0.1, "grid_points": 1001,
           "batch_per_eval": 2000, "anchor_beta": None, "signal_var": 1.0, "length_scale": 0.15,
           "noise_var": 1e-4, "objective": "sampled", "parabola_center": 0.3, "noise_sd": 0.0},
    "oracle": {"tuples": 200, "grid_points": 200000, "n_sd": 8.0, "tol": 1e-4, "compose_trials": 200},
}

_INT_KEYS = {"seed", "T", "num_inference_steps", "batch_size", "chunk_size", "distance_cap", "bootstrap",
             "budget", "n_init", "grid_points", "batch_per_eval", "tuples",
             "compose_trials"}
_FLOAT_KEYS = {"beta_min", "beta_max", "cosine_s", "max_beta", "guidance_scale", "eta", "delta",
               "anchor_beta", "signal_var", "length_scale", "noise_var", "parabola_center", "noise_sd",
               "n_sd", "tol"}


def _line(node):
    return node.start_mark.line + 1


def _coerce(key, value, line):
    # YAML 1.1 reads "1e-4" as a string, so numbers are coerced explicitly.
    if value is None:
        return None
    try:
        if key in _INT_KEYS:
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise ValueError
            return int(float(value))
        if key in _FLOAT_KEYS:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key}: expected a number, got {value!r}", line) from None
    return value


def _float_list(key, value, line):
    if not isinstance(value, list) or not value:
        raise ConfigurationError(f"{key}: expected a nonempty list of numbers", line)
    try:
        out = [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key}: expected numbers, got {value!r}", line) from None
    if any(not v > 0 for v in out):
        raise ConfigurationError(f"{key}: every entry must be positive", line)
    return out


@dataclass
class ExperimentConfig:
    raw: dict
    data: Optional[GaussianMixture] = None
    classes: Optional[list] = None
    priors: Optional[list] = None
    reward: object = None
    anchor_betas: list = field(default_factory=list)
    target_betas: list = field(default_factory=list)

    def __getitem__(self, key):
        return self.raw[key]

    def resolved(self):
        """Plain-data view of every setting, used to stamp output files."""
        return self.raw


def load_config(path, seed_override=None):
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, seed_override)


def parse_config(text, seed_override=None):
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigurationError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                                 mark.line + 1 if mark else None) from None
    if root is None:
        raise ConfigurationError("empty configuration")
    if not isinstance(root, yaml.MappingNode):
        raise ConfigurationError("top level must be a mapping", _line(root))

    loader = yaml.SafeLoader("")
    raw = {k: (dict(v) if isinstance(v, dict) else v) for k, v in DEFAULTS.items()}
    lines = {}
    for key_node, value_node in root.value:
        key = key_node.value
        if key not in SCHEMA:
            raise ConfigurationError(f"unknown key {key!r}", _line(key_node))
        lines[key] = _line(key_node)
        value = loader.construct_object(value_node, deep=True)
        allowed = SCHEMA[key]
        if allowed is None:
            raw[key] = _coerce(key, value, _line(value_node))
            continue
        if not isinstance(value_node, yaml.MappingNode):
            raise ConfigurationError(f"{key}: expected a mapping", _line(value_node))
        for sub_key, sub_value in value_node.value:
            name = sub_key.value
            if name not in allowed:
                raise ConfigurationError(f"unknown key {key}.{name}", _line(sub_key))
            raw[key][name] = _coerce(name, loader.construct_object(sub_value, deep=True), _line(sub_value))
            lines[f"{key}.{name}"] = _line(sub_value)

    if seed_override is not None:
        raw["seed"] = int(seed_override)
    if not isinstance(raw["seed"], int) or raw["seed"] < 0:
        raise ConfigurationError("seed must be a nonnegative integer", lines.get("seed"))

    cfg = ExperimentConfig(raw)
    try:
        if raw.get("classes") is not None:
            cfg.classes = [GaussianMixture.from_dict(c) for c in raw["classes"]]
            cfg.priors = [float(p) for p in raw.get("priors") or []]
        if raw.get("data_mixture") is not None:
            cfg.data = GaussianMixture.from_dict(raw["data_mixture"])
    except ConfigurationError as exc:
        key = "classes" if raw.get("classes") is not None else "data_mixture"
        raise ConfigurationError(str(exc), lines.get(key)) from None
    if cfg.data is None and cfg.classes is None:
        raise ConfigurationError("one of data_mixture or classes is required")
    if raw.get("reward") is not None:
        try:
            cfg.reward = reward_from_dict(raw["reward"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"reward: {exc}", lines.get("reward")) from None
    for key in ("anchor_betas", "target_betas"):
        if raw.get(key) is not None:
            setattr(cfg, key, _float_list(key, raw[key], lines.get(key)))
            raw[key] = getattr(cfg, key)
    return cfg

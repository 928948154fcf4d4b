"""Flat dotted-key run configuration.

Files are YAML mappings with dotted keys (``train.steps: 2000``). Unknown keys
are rejected. Precedence, lowest to highest: defaults, config file,
``--set key=value`` flags, dedicated command-line flags.
"""
from __future__ import annotations

import os
from pathlib import Path

import yaml

DEFAULTS: dict[str, object] = {
    "data.root": "",
    "data.height": 64,
    "data.width": 64,
    "data.interpolation": "bilinear",
    "model.preset": "desk",
    "model.clip_length": 8,
    "synth.enabled": True,
    "synth.p": 0.01,
    "synth.skip_set": [2, 3, 4, 5],
    "train.learning_rate": 1e-4,
    "train.batch_size": 4,
    "train.steps": 2000,
    "train.epochs": 0,
    "train.seed": 0,
    "train.betas": [0.9, 0.999],
    "train.adam_eps": 1e-8,
    "train.pseudo_margin": None,
    "train.checkpoint_every": 0,
    "train.log_every": 100,
    "score.target_offset": 4,
    "score.peak": 1.0,
    "score.eps": 1e-10,
    "score.batch_size": 16,
}


class ConfigError(ValueError):
    pass


def _coerce(key: str, value):
    default = DEFAULTS[key]
    if value is None:
        return None
    if isinstance(value, str) and not isinstance(default, str):
        value = yaml.safe_load(value)
        if value is None:
            return None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float) or (default is None and isinstance(value, (int, float))):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, list):
        if isinstance(value, (int, float)):
            value = [value]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        return list(value)
    return str(value)


def validate(cfg: dict) -> dict:
    unknown = sorted(set(cfg) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return {k: _coerce(k, v) for k, v in cfg.items()}


def parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"override {pair!r} is not key=value")
        out[key.strip()] = value.strip()
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> dict:
    cfg = dict(DEFAULTS)
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config must be a key/value mapping")
        cfg.update(validate(loaded))
    if overrides:
        cfg.update(validate(overrides))
    if "STEAL_SEED" in os.environ and not _seed_given(path, overrides):
        cfg["train.seed"] = int(os.environ["STEAL_SEED"])
    return cfg


def _seed_given(path, overrides) -> bool:
    if overrides and "train.seed" in overrides:
        return True
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text()) or {}
        return "train.seed" in loaded
    return False


def dump_config(cfg: dict, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(dict(sorted(cfg.items())), sort_keys=False))

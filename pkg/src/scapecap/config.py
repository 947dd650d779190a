"""Pipeline configuration: defaults, YAML file, ``key=value`` overrides.

Precedence is command-line flags > config file > defaults.  The config hash
covers everything that can change an artifact (it skips ``jobs``).
"""

import copy
import hashlib
import json
from dataclasses import asdict, fields
from pathlib import Path

import yaml

from .caption.client import ClientConfig
from .errors import ConfigError
from .features.calibration import CalibrationRef
from .features.pipeline import FeatureConfig
from .model.network import ModelConfig
from .train import TrainConfig

RUNTIME_KEYS = ("jobs",)


def _dataclass_defaults(cls):
    d = asdict(cls())
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def default_config():
    features = _dataclass_defaults(FeatureConfig)
    features["calibration"] = {k: float(v) for k, v in asdict(CalibrationRef()).items()}
    return {
        "seed": 0,
        "jobs": 1,
        "paths": {
            "manifest": "data/manifest.csv",
            "tagger_dir": "data/tagger",
            "class_names": "data/class_names.csv",
            "ratings": "data/ratings.csv",
            "work_dir": "work",
        },
        "features": features,
        "model": _dataclass_defaults(ModelConfig),
        "train": {k: v for k, v in _dataclass_defaults(TrainConfig).items() if k != "seed"},
        "thresholds": {"tagger_segment": 0.5, "tagger_clip": 0.1, "caption_event": 0.3},
        "pseudo_label": {"masker_classes": [], "clip_aggregation": "mean"},
        "split": {"sizes": None},
        "caption": {"provider": "http", "stub_mode": "echo", "template": "v1", "max_output_tokens": 200,
                    **_dataclass_defaults(ClientConfig)},
        "analysis": {"alpha": 0.05, "per_caption_mean": True, "split": None},
    }


def _merge(base, update, path=""):
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and value is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be a mapping")
            _merge(base[key], value, where + ".")
        else:
            base[key] = value
    return base


def parse_override(text):
    """``a.b.c=value`` -> nested dict; the value is parsed as YAML."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {text!r}: {exc}") from None
    out = value
    for part in reversed(key.strip().split(".")):
        out = {part: out}
    return out


def load_config(path=None, overrides=(), seed=None, jobs=None):
    cfg = default_config()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must hold a mapping")
        _merge(cfg, data)
        base = path.parent.resolve()
        for key, value in cfg["paths"].items():
            if value is not None and not Path(value).is_absolute():
                cfg["paths"][key] = str(base / value)
    for ov in overrides:
        _merge(cfg, parse_override(ov))
    if seed is not None:
        cfg["seed"] = seed
    if jobs is not None:
        cfg["jobs"] = jobs
    return cfg


def config_hash(cfg):
    material = {k: v for k, v in cfg.items() if k not in RUNTIME_KEYS}
    return hashlib.sha256(json.dumps(material, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _build(cls, section):
    names = {f.name for f in fields(cls)}
    unknown = set(section) - names
    if unknown:
        raise ConfigError(f"{cls.__name__} has no settings {sorted(unknown)}")
    return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in section.items()})


def feature_config(cfg):
    section = copy.deepcopy(cfg["features"])
    section["calibration"] = _build(CalibrationRef, section["calibration"])
    return _build(FeatureConfig, section)


def model_config(cfg):
    return _build(ModelConfig, cfg["model"])


def train_config(cfg):
    section = dict(cfg["train"])
    section["seed"] = cfg["seed"]
    try:
        return _build(TrainConfig, section)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def client_config(cfg):
    section = {k: v for k, v in cfg["caption"].items() if k in {f.name for f in fields(ClientConfig)}}
    return _build(ClientConfig, section)

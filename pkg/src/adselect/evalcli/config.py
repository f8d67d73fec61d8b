"""Experiment configuration: a strict INI schema with defaults and hashing.

Sectioned key=value text keeps experiment matrices diff-friendly.  Every
key is declared below with its type and default; unknown sections or keys
are rejected so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass


class ConfigError(ValueError):
    pass


_BOOL_TRUE = ("1", "true", "yes", "on")
_BOOL_FALSE = ("0", "false", "no", "off")

# type tags: int, float, bool, str, contamination ("auto" or a float in (0,1))
SCHEMA = {
    "dataset": {
        "normal_csv": ("str", ""),
        "anomalous_csv": ("str", ""),
        "synthetic_normal_hours": ("int", 35064),
        "synthetic_test_hours": ("int", 1008),
        "synthetic_seed": ("int", 0),
        "scaler": ("str", "minmax"),
    },
    "inject": {
        "kind": ("str", "mixed"),
        "rate": ("float", 0.05),
        "seed": ("int", 0),
        "global_u_min": ("float", 0.1),
        "global_u_max": ("float", 0.5),
        "local_k_min": ("float", 3.0),
        "local_k_max": ("float", 5.0),
        "cluster_len_min": ("int", 4),
        "cluster_len_max": ("int", 6),
    },
    "window": {
        "length": ("int", 6),
        "step": ("int", 1),
        "label_rule": ("str", "any"),
        "max_gap_hours": ("float", 6.0),
    },
    "detectors": {
        "contamination": ("contamination", "auto"),
        "tune": ("str", ""),
        "tune_budget": ("int", 0),
        "seed": ("int", 0),
        "knn_n_neighbors": ("int", 5),
        "knn_method": ("str", "mean"),
        "osvm_nu": ("float", 0.5),
        "iforest_n_estimators": ("int", 100),
        "iforest_max_features": ("float", 1.0),
        "usad_epochs": ("int", 100),
    },
    "tsf": {
        "n_trees": ("int", 100),
        "min_interval": ("int", 1),
        "train_frac": ("float", 0.2),
        "seed": ("int", 0),
    },
    "selector": {
        "reward": ("str", "Original"),
        "mode": ("str", "mixed"),
        "epsilon": ("str", "decaying"),
        "epsilon_value": ("float", 0.05),
        "epsilon_start": ("float", 1.0),
        "epsilon_end": ("float", 0.05),
        "epsilon_fraction": ("float", 0.7),
        "total_steps": ("int", 60000),
        "seed": ("int", 0),
        "replay_capacity": ("int", 100000),
        "batch_size": ("int", 32),
        "lr": ("float", 1e-4),
        "target_sync": ("int", 1000),
    },
    "output": {
        "dir": ("str", "runs/experiment"),
        "plots": ("bool", True),
    },
}

_CHOICES = {
    ("dataset", "scaler"): ("minmax", "log"),
    ("inject", "kind"): ("global", "local", "clustered", "mixed"),
    ("window", "label_rule"): ("any", "last", "majority"),
    ("detectors", "knn_method"): ("largest", "mean", "median"),
    ("selector", "reward"): ("Original", "R1", "R2", "AdapInc", "AdapDec"),
    ("selector", "mode"): ("mixed", "gtruth_only", "class_only"),
    ("selector", "epsilon"): ("decaying", "constant"),
}


def _coerce(section, key, raw):
    type_tag, _ = SCHEMA[section][key]
    raw = str(raw).strip()
    try:
        if type_tag == "int":
            return int(raw)
        if type_tag == "float":
            return float(raw)
        if type_tag == "bool":
            low = raw.lower()
            if low in _BOOL_TRUE:
                return True
            if low in _BOOL_FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if type_tag == "contamination":
            if raw.lower() == "auto":
                return "auto"
            value = float(raw)
            if not 0.0 < value < 1.0:
                raise ValueError(f"contamination must be 'auto' or in (0, 1), got {raw}")
            return value
        return raw
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


@dataclass
class ExperimentConfig:
    sections: dict

    def get(self, section, key):
        try:
            return self.sections[section][key]
        except KeyError:
            raise ConfigError(f"no config entry [{section}] {key}") from None

    def set(self, section, key, raw_value):
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown config entry [{section}] {key}")
        value = _coerce(section, key, raw_value)
        choices = _CHOICES.get((section, key))
        if choices is not None and value not in choices:
            raise ConfigError(f"[{section}] {key}: expected one of {choices}, got {value!r}")
        self.sections[section][key] = value

    def tuned_kinds(self) -> list:
        raw = self.get("detectors", "tune")
        return [k.strip().lower() for k in raw.split(",") if k.strip()]


def default_config() -> ExperimentConfig:
    sections = {
        section: {key: default for key, (_, default) in keys.items()}
        for section, keys in SCHEMA.items()
    }
    return ExperimentConfig(sections=sections)


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = default_config()
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in section [{section}]")
            cfg.set(section, key, raw)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    for (section, key), choices in _CHOICES.items():
        value = cfg.get(section, key)
        if value not in choices:
            raise ConfigError(f"[{section}] {key}: expected one of {choices}, got {value!r}")
    if cfg.get("window", "length") < 1 or cfg.get("window", "step") < 1:
        raise ConfigError("[window] length and step must be >= 1")
    if not 0.0 < cfg.get("inject", "rate") < 1.0:
        raise ConfigError("[inject] rate must be in (0, 1)")
    if cfg.get("selector", "epsilon") == "constant":
        # mirror the schedule's own restriction early, at parse time
        if cfg.get("selector", "epsilon_value") not in (0.9, 0.5, 0.05):
            raise ConfigError("[selector] epsilon_value must be one of 0.9, 0.5, 0.05")
    for kind in cfg.tuned_kinds():
        if kind not in ("knn", "osvm", "iforest", "usad"):
            raise ConfigError(f"[detectors] tune: {kind!r} is not tunable")


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form: sorted sections and keys, repr'd values."""
    out = io.StringIO()
    for section in sorted(cfg.sections):
        out.write(f"[{section}]\n")
        for key in sorted(cfg.sections[section]):
            value = cfg.sections[section][key]
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            out.write(f"{key} = {text}\n")
        out.write("\n")
    return out.getvalue()


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w") as fh:
        fh.write(serialize_config(cfg))


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()


def contamination_value(cfg: ExperimentConfig, true_rate=None) -> float:
    """Resolve the contamination setting; 'auto' uses the true window rate."""
    setting = cfg.get("detectors", "contamination")
    if setting == "auto":
        if true_rate is None:
            raise ConfigError("contamination=auto needs the true anomaly rate")
        if not 0.0 < true_rate < 1.0:
            raise ConfigError(f"auto contamination rate {true_rate} outside (0, 1)")
        return float(true_rate)
    return float(setting)

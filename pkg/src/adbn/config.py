"""Run configuration: one YAML tree with full defaulting and strict keys.

Every field defaults from the dataclasses; unknown keys are rejected with
their full path; flag overrides (``section.key=value``) win over the file.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, is_dataclass

import yaml

from .adaptive import StructureConfig
from .data import SynthConfig
from .distill import RepairConfig
from .rbm import CdConfig


class ConfigError(ValueError):
    """Invalid configuration file or override."""


@dataclass
class HeadConfig:
    epochs: int = 200
    lr: float = 0.5

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")


@dataclass
class PathsConfig:
    out_dir: str = "out"


@dataclass
class RunConfig:
    seed: int = 0
    cd: CdConfig = field(default_factory=CdConfig)
    structure: StructureConfig = field(default_factory=StructureConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    repair: RepairConfig = field(default_factory=RepairConfig)
    head: HeadConfig = field(default_factory=HeadConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)


def _coerce(value, target_type, path: str):
    if target_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if target_type is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if target_type is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    return value


_FIELD_TYPES = {
    "seed": int, "k": int, "learning_rate": float, "batch_size": int, "epochs": int,
    "theta_gen": float, "theta_ann": float, "window": int, "warmup_epochs": int,
    "max_hidden": int, "n_hidden_init": int, "theta_wd_layer": float,
    "theta_energy_layer": float, "max_layers": int, "inherit_noise_sigma": float,
    "n_classes": int, "samples_per_class": int, "input_dim": int,
    "pair_overlap": float, "disagreement_rate": float, "noise": float,
    "theta_kl": float, "activation_threshold": float, "upper_layers": int,
    "child_train_set": str, "child_head_epochs": int, "child_lr": float,
    "child_cd_epochs": int, "child_cd_lr": float, "child_max_rounds": int,
    "retrain_head_epochs": int, "retrain_lr": float, "cd_refresh_epochs": int,
    "cd_refresh_lr": float, "sigma_perturb": float, "fine_tune_scope": str,
    "theta_T": float, "theta_F": float, "w_correct": float, "w_wrong": float,
    "exclusive": bool, "lr": float, "out_dir": str,
}


def _build_dataclass(cls, mapping, path: str):
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path or 'config root'}: expected a mapping, got {mapping!r}")
    known = {f.name: f for f in fields(cls)}
    for key in mapping:
        if key not in known:
            raise ConfigError(f"unknown config key '{path + '.' if path else ''}{key}'")
    kwargs = {}
    for name, f in known.items():
        if name not in mapping:
            continue
        value = mapping[name]
        child_path = f"{path}.{name}" if path else name
        default = _default_of(f)
        if is_dataclass(default):
            kwargs[name] = _build_dataclass(type(default), value, child_path)
        elif name == "confusable_pair":
            if (not isinstance(value, (list, tuple)) or len(value) != 2
                    or not all(isinstance(v, int) and not isinstance(v, bool)
                               for v in value)):
                raise ConfigError(f"{child_path}: expected a pair of class indices, "
                                  f"got {value!r}")
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = _coerce(value, _FIELD_TYPES.get(name), child_path)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None


def _default_of(f):
    if f.default is not dataclasses.MISSING:
        return f.default
    if f.default_factory is not dataclasses.MISSING:  # type: ignore[misc]
        return f.default_factory()
    return None


def _set_path(tree: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = tree
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override '{dotted}' crosses non-mapping key '{part}'")
    node[parts[-1]] = value


def load_config(path=None, overrides: tuple[str, ...] = ()) -> RunConfig:
    """Load the YAML file (if given), apply ``key.path=value`` overrides."""
    tree: dict = {}
    if path is not None:
        try:
            text = open(path, encoding="utf-8").read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        loaded = yaml.safe_load(text)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config root of {path} must be a mapping")
        tree = loaded
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key.path=value")
        dotted, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError:
            value = raw
        _set_path(tree, dotted.strip(), value)
    return _build_dataclass(RunConfig, tree, "")


def dump_config(cfg: RunConfig) -> str:
    """Full effective configuration as YAML (every default included)."""
    def to_tree(obj):
        if is_dataclass(obj):
            return {f.name: to_tree(getattr(obj, f.name)) for f in fields(obj)}
        if isinstance(obj, tuple):
            return list(obj)
        return obj
    return yaml.safe_dump(to_tree(cfg), sort_keys=True, default_flow_style=False)

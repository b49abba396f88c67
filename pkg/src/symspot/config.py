"""Run configuration: nested dataclasses, YAML files, dotted overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml


@dataclass
class BackboneConfig:
    dim: int = 128
    levels: int = 5
    knn: int = 8
    ratio: int = 4


@dataclass
class LfeConfig:
    enabled: bool = True
    pool_mode: str = "concat"  # mean | max | attn | concat
    hidden_dim: int = 256
    fusion: str = "concat"  # concat | sum
    multi_scale: bool = False  # apply to every pyramid level (shared weights)


@dataclass
class DecoderConfig:
    layers: int = 6
    heads: int = 8
    num_queries: int = 100
    ffn_dim: int = 0  # 0 -> 4 * dim
    tau_mask: float = 0.5
    tau_cls: float = 0.5


@dataclass
class PgtConfig:
    enabled: bool = True
    epsilon: float = 0.1
    encoding: str = "fourier"  # fourier | sine
    fourier_scale: float = 1.0
    max_center_queries: int = 0  # 0 -> one per GT object


@dataclass
class ModelConfig:
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    lfe: LfeConfig = field(default_factory=LfeConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    pgt: PgtConfig = field(default_factory=PgtConfig)


@dataclass
class LossConfig:
    bce: float = 5.0
    dice: float = 5.0
    cls: float = 2.0
    no_object: float = 0.1
    dice_smooth: float = 1.0


@dataclass
class OptimConfig:
    lr: float = 2e-4
    weight_decay: float = 0.1
    epochs: int = 250
    batch_size: int = 16  # drawings per optimizer step (gradient accumulation)
    clip_norm: float = 1.0
    schedule: str = "cosine"  # cosine | none


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "runs/exp"
    log_every: int = 1  # epochs between JSONL metric records
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)


_SECTIONS = {
    "model": ModelConfig,
    "loss": LossConfig,
    "optim": OptimConfig,
    "backbone": BackboneConfig,
    "lfe": LfeConfig,
    "decoder": DecoderConfig,
    "pgt": PgtConfig,
}


def _build(cls: type, data: dict) -> Any:
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in fields:
            valid = ", ".join(sorted(fields))
            raise ValueError(f"unknown config key {key!r} in {cls.__name__} (valid: {valid})")
        ftype = fields[key].type
        if isinstance(value, dict):
            section = _SECTIONS.get(key)
            if section is None:
                raise ValueError(f"config key {key!r} does not take a mapping")
            kwargs[key] = _build(section, value)
        else:
            kwargs[key] = _coerce(value, str(ftype), key)
    return cls(**kwargs)


def _coerce(value: Any, ftype: str, key: str) -> Any:
    if "bool" in ftype:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0"):
            return value.lower() in ("true", "1")
        raise ValueError(f"config key {key!r} expects a bool, got {value!r}")
    if "int" in ftype:
        return int(value)
    if "float" in ftype:
        return float(value)
    return str(value)


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data)


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path: str | Path) -> RunConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config file must hold a mapping")
    return config_from_dict(data)


def save_config(path: str | Path, cfg: RunConfig) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)


def apply_overrides(cfg: RunConfig, pairs: list[str]) -> RunConfig:
    """Apply ``section.key=value`` overrides (e.g. ``model.lfe.pool_mode=max``)."""
    data = config_to_dict(cfg)
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"override {pair!r} is not of the form key=value")
        dotted, value = pair.split("=", 1)
        node = data
        parts = dotted.split(".")
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ValueError(f"override {pair!r}: no config section {p!r}")
            node = node[p]
        if parts[-1] not in node:
            raise ValueError(f"override {pair!r}: no config key {parts[-1]!r}")
        node[parts[-1]] = yaml.safe_load(value)
    return config_from_dict(data)

"""Configuration dataclasses and layered loading.

Precedence is built-in defaults < JSON config file < ``--set key=value``
overrides. Unknown keys are rejected at every layer.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError


@dataclass
class SimulatorConfig:
    contrast_threshold: float = 0.2
    log_eps: float = 1e-4
    framerate: float = 150.0
    refractory: float = 0.0
    crf: str = "linear"  # "linear" or "gamma"
    gamma: float = 2.2

    def validate(self) -> None:
        if not self.contrast_threshold > 0:
            raise ConfigError(f"contrast_threshold must be > 0, got {self.contrast_threshold}")
        if not self.framerate > 0:
            raise ConfigError(f"framerate must be > 0, got {self.framerate}")
        if self.refractory < 0:
            raise ConfigError("refractory must be >= 0")
        if self.log_eps <= 0:
            raise ConfigError("log_eps must be > 0")
        if self.crf not in ("linear", "gamma"):
            raise ConfigError(f"unknown crf {self.crf!r}")


@dataclass
class ModelConfig:
    base_channels: int = 32
    bins: int = 6
    mrfr_kernel_sizes: tuple = (3, 5, 7)
    growth: int = 16
    dense_layers: int = 3
    drd_blocks: int = 4
    deformable_groups: int = 1
    deformable: bool = True  # False selects the plain-conv fallback (reduced fidelity)

    def validate(self) -> None:
        if self.base_channels < 8:
            raise ConfigError("base_channels must be >= 8")
        if self.bins < 1:
            raise ConfigError("bins must be >= 1")
        if any(k % 2 == 0 or k < 1 for k in self.mrfr_kernel_sizes):
            raise ConfigError("mrfr kernel sizes must be odd")
        if len(self.mrfr_kernel_sizes) != 3:
            raise ConfigError("MRFR takes exactly three kernel sizes")
        if self.base_channels % self.deformable_groups:
            raise ConfigError("base_channels must be divisible by deformable_groups")


@dataclass
class LossWeights:
    l1: float = 1.0
    l2: float = 1.0
    l3: float = 1.0
    l4: float = 1.0
    w_l1: float = 1.0
    w_perc: float = 0.1
    w_gan: float = 0.01
    mu: float = 5000.0

    def validate(self) -> None:
        for name in ("l1", "l2", "l3", "l4", "w_l1", "w_perc", "w_gan"):
            if getattr(self, name) < 0:
                raise ConfigError(f"loss weight {name} must be >= 0")

    @property
    def lambdas(self) -> tuple[float, float, float, float]:
        return (self.l1, self.l2, self.l3, self.l4)


@dataclass
class TrainConfig:
    epochs: int = 200
    lr0: float = 2e-4
    decay_start_epoch: int = 100
    batch_size: int = 4
    crop: int = 256
    stage: str = "pretrain"
    seed: int = 0
    max_steps: int | None = None
    checkpoint_every: int = 1
    betas: tuple = (0.9, 0.999)
    d_lr_scale: float = 1.0

    def validate(self) -> None:
        if not 0 < self.decay_start_epoch < self.epochs:
            raise ConfigError("need 0 < decay_start_epoch < epochs")
        if not self.lr0 > 0:
            raise ConfigError("lr0 must be > 0")
        if self.stage not in ("pretrain", "full"):
            raise ConfigError(f"unknown stage {self.stage!r}")
        if self.batch_size < 1 or self.crop < 4:
            raise ConfigError("batch_size must be >= 1 and crop >= 4")


@dataclass
class ToneMapConfig:
    mu: float = 5000.0
    normalize: str = "per-image-max"  # or "fixed-1"

    def validate(self) -> None:
        if not self.mu > 0:
            raise ConfigError("mu must be > 0")
        if self.normalize not in ("per-image-max", "fixed-1"):
            raise ConfigError(f"unknown normalization {self.normalize!r}")


@dataclass
class Config:
    sim: SimulatorConfig = field(default_factory=SimulatorConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    train: TrainConfig = field(default_factory=TrainConfig)
    tonemap: ToneMapConfig = field(default_factory=ToneMapConfig)

    def validate(self) -> "Config":
        for f in dataclasses.fields(self):
            getattr(self, f.name).validate()
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        cfg = cls()
        apply_mapping(cfg, data)
        return cfg.validate()


def _coerce(current: Any, value: Any, key: str) -> Any:
    if isinstance(current, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key} expects a list")
        return tuple(value)
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} expects a boolean")
        return value
    if isinstance(current, int) and isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(current, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if current is not None and value is not None and not isinstance(value, type(current)):
        raise ConfigError(f"{key} expects {type(current).__name__}, got {value!r}")
    return value


def apply_mapping(cfg: Config, data: dict) -> None:
    for section, values in data.items():
        if section not in {f.name for f in dataclasses.fields(cfg)}:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        for key, value in values.items():
            set_key(cfg, f"{section}.{key}", value)


def set_key(cfg: Config, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    if len(parts) != 2:
        raise ConfigError(f"config keys look like section.key, got {dotted!r}")
    section, key = parts
    if section not in {f.name for f in dataclasses.fields(cfg)}:
        raise ConfigError(f"unknown config section {section!r}")
    obj = getattr(cfg, section)
    if key not in {f.name for f in dataclasses.fields(obj)}:
        raise ConfigError(f"unknown config key {dotted!r}")
    setattr(obj, key, _coerce(getattr(obj, key), value, dotted))


def parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(f"override must be key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(path: str | Path | None = None, overrides: list[str] | tuple = ()) -> Config:
    cfg = Config()
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a JSON object")
        apply_mapping(cfg, data)
    for item in overrides:
        set_key(cfg, *parse_override(item))
    return cfg.validate()

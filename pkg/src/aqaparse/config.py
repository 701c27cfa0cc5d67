"""Experiment configuration: one JSON file drives every command.

Sections mirror the pipeline: "synthetic" (corpus generation), "model"
(architecture + geometry), "train" (optimization), "eval" (inference and
metrics). Every field has a default and is overridable; unknown keys are
rejected. validate() runs every static invariant before any compute.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .losses import FocalConfig
from .metrics import MetricConfig
from .model import ModelConfig
from .synthetic import SyntheticConfig


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 8
    seed: int = 11
    lr_sap: float = 1e-3
    lr_tap: float = 1e-4
    lr_sve: float = 1e-3
    lr_reg: float = 1e-3
    weight_decay: float = 0.0
    train_fraction: float = 0.75
    split_seed: int = 5
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    teacher_force: bool = True
    threads: int | None = None
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        for name in ("lr_sap", "lr_tap", "lr_sve", "lr_reg"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1 when set")
        FocalConfig(self.focal_alpha, self.focal_gamma)

    def focal(self) -> FocalConfig:
        return FocalConfig(self.focal_alpha, self.focal_gamma)


@dataclass(frozen=True)
class EvalConfig:
    exemplars: int = 10
    seed: int = 202
    beta2: float = 0.3
    alpha: float = 0.5
    aiou_thresholds: tuple[float, ...] = (0.5, 0.75)
    mask_threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.exemplars < 1:
            raise ConfigError("exemplars must be >= 1")
        MetricConfig(self.beta2, self.alpha, self.aiou_thresholds, self.mask_threshold)

    def metric_config(self) -> MetricConfig:
        return MetricConfig(self.beta2, self.alpha, self.aiou_thresholds, self.mask_threshold)


@dataclass(frozen=True)
class ExperimentConfig:
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def validate(self) -> None:
        """Cross-section consistency plus every per-section invariant."""
        s, m = self.synthetic, self.model
        if (s.frames, s.height, s.width) != (m.frames, m.height, m.width):
            raise ConfigError(
                f"corpus geometry ({s.frames},{s.height},{s.width}) != model geometry "
                f"({m.frames},{m.height},{m.width})"
            )
        if s.num_transitions != m.num_transitions:
            raise ConfigError(
                f"corpus has {s.num_transitions} transitions, model expects {m.num_transitions}"
            )
        m.validate_shapes()

    def to_dict(self) -> dict:
        return _as_plain(dataclasses.asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _as_plain(value):
    if isinstance(value, dict):
        return {k: _as_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_as_plain(v) for v in value]
    if hasattr(value, "tolist"):  # numpy arrays/scalars
        return value.tolist()
    return value


_SECTIONS = {
    "synthetic": SyntheticConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}


def _build_section(cls, data: dict, section: str):
    field_types = {f.name: f.type for f in fields(cls)}
    unknown = set(data) - set(field_types)
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    sections = {}
    for name, cls in _SECTIONS.items():
        payload = data.get(name, {})
        if not isinstance(payload, dict):
            raise ConfigError(f"section '{name}' must be a JSON object")
        sections[name] = _build_section(cls, payload, name)
    cfg = ExperimentConfig(**sections)
    cfg.validate()
    return cfg


def load_config(path: Path | None) -> ExperimentConfig:
    """Config from a JSON file; defaults when no path is given."""
    if path is None:
        cfg = ExperimentConfig()
        cfg.validate()
        return cfg
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(data)

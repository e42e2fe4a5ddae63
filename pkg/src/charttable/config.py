"""Pipeline configuration loaded from TOML; one section per module."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model.config import ModelConfig
from .ocr import NoiseModel
from .objectives import DEFAULT_MAX_MASKS, DEFAULT_RATE, ObjectiveError, choose_objective
from .stc import DEFAULT_MAX_OCR
from .synth.corpus import SpecGenConfig
from .table import ConfigError, TableGenConfig

SECTIONS = ("table", "chart", "ocr_noise", "objectives", "model", "train", "eval")
TOP_LEVEL = ("seed", "output_root")


@dataclass(frozen=True)
class ObjectivesConfig:
    selector: str = "alternate"
    rate: float = DEFAULT_RATE
    max_masks: int = DEFAULT_MAX_MASKS
    max_ocr: int = DEFAULT_MAX_OCR

    def __post_init__(self):
        if not 0 < self.rate <= 1:
            raise ConfigError(f"objectives.rate must be in (0, 1], got {self.rate}")
        if self.max_masks < 1 or self.max_ocr < 1:
            raise ConfigError("objectives.max_masks and max_ocr must be >= 1")
        try:
            choose_objective(self.selector, 0)
        except ObjectiveError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 1500
    lr: float = 0.1
    optimizer: str = "momentum"
    momentum: float = 0.9
    batch_size: int = 16
    clip: float = 1.0
    n_train: int = 200
    n_test: int = 50

    def __post_init__(self):
        if self.steps < 0 or not self.lr > 0 or self.batch_size < 1:
            raise ConfigError("train.steps >= 0, train.lr > 0 and train.batch_size >= 1 required")
        if self.optimizer not in ("sgd", "momentum", "adam"):
            raise ConfigError(f"train.optimizer must be sgd, momentum or adam, got {self.optimizer!r}")


@dataclass(frozen=True)
class EvalConfig:
    strict_case: bool = False
    rel_tol: float = 0.05
    qa_per_table: int = 2

    def __post_init__(self):
        if self.rel_tol < 0 or self.qa_per_table < 1:
            raise ConfigError("eval.rel_tol >= 0 and eval.qa_per_table >= 1 required")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    output_root: str = "out"
    table: TableGenConfig = field(default_factory=TableGenConfig)
    chart: SpecGenConfig = field(default_factory=SpecGenConfig)
    ocr_noise: NoiseModel = field(default_factory=NoiseModel)
    objectives: ObjectivesConfig = field(default_factory=ObjectivesConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


_SECTION_TYPES = {"table": TableGenConfig, "chart": SpecGenConfig, "ocr_noise": NoiseModel,
                  "objectives": ObjectivesConfig, "model": ModelConfig, "train": TrainConfig,
                  "eval": EvalConfig}


def _build(section: str, cls, raw: dict):
    if not isinstance(raw, dict):
        raise ConfigError(f"[{section}] must be a table")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")
    kw = {}
    for k, v in raw.items():
        default = getattr(cls(), k)
        if isinstance(default, tuple) and isinstance(v, list):
            v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
        kw[k] = v
    try:
        return cls(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def config_from_dict(d: dict) -> PipelineConfig:
    unknown = sorted(set(d) - set(SECTIONS) - set(TOP_LEVEL))
    if unknown:
        raise ConfigError(f"unknown key(s) at top level: {', '.join(unknown)}")
    kw = {k: d[k] for k in TOP_LEVEL if k in d}
    if "seed" in kw and not isinstance(kw["seed"], int):
        raise ConfigError("seed must be an integer")
    for s in SECTIONS:
        if s in d:
            kw[s] = _build(s, _SECTION_TYPES[s], d[s])
    return PipelineConfig(**kw)


def load_config(path) -> PipelineConfig:
    p = Path(path)
    try:
        raw = tomllib.loads(p.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return config_from_dict(raw)

"""Experiment configuration and its flat ``key=value`` file format.

A config names a task preset via ``task=`` and may override any key::

    # desk-scale blockworld
    task=blockworld32
    architecture=conv
    updates=20000
    lam=0.95

Lines starting with ``#`` and blank lines are ignored. Tuples are written
comma-separated (``sizes=6,8``).
"""
from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from harness.errors import ConfigError
from seekrl.schemas import HyperParams, RewardSpec

PRESETS: dict[str, dict] = {
    "mnist28": {
        "world": "cluttered", "architecture": "conv", "canvas": 28, "block_size": 2,
        "clutter_count": 0, "summary_factor": 0, "horizon": 20,
    },
    "cluttered52": {
        "world": "cluttered", "architecture": "conv", "canvas": 52, "block_size": 4,
        "clutter_count": 4, "patch_size": 8, "summary_factor": 4, "horizon": 20,
    },
    "cluttered104": {
        "world": "cluttered", "architecture": "conv", "canvas": 104, "block_size": 4,
        "clutter_count": 8, "patch_size": 8, "summary_factor": 8, "horizon": 41,
    },
    "blockworld32": {
        "world": "blockworld", "architecture": "conv", "canvas": 32, "block_size": 4,
        "sizes": (6, 8), "horizon": 20,
    },
    "blockworld64": {
        "world": "blockworld", "architecture": "conv", "canvas": 64, "block_size": 4,
        "sizes": (12, 16), "horizon": 20,
    },
    "hangman": {
        "world": "hangman", "architecture": "fc", "window": 16, "alphabet": 27, "horizon": 27,
        "extrinsic": "native", "intrinsic": "none",
    },
    "features": {
        "world": "features", "architecture": "fc", "horizon": 4, "x_model": "gaussian",
    },
}

# Keys that do not influence what training computes.
NON_DIGEST_KEYS = frozenset({
    "threads", "images", "labels", "test_images", "test_labels", "corpus", "features_csv",
    "test_features_csv", "metrics_path", "checkpoint_path", "dump_dir", "metrics_every",
    "checkpoint_every", "eval_episodes", "updates",
})


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    task: str = "mnist28"
    world: Literal["cluttered", "blockworld", "hangman", "features"] = "cluttered"
    architecture: Literal["fc", "conv"] = "conv"
    policy: Literal["model", "random", "freq"] = "model"
    full_observation: bool = False

    # hyperparameters
    gamma: float = Field(default=1.0, gt=0.0, le=1.0)
    lam: float = Field(default=0.95, gt=0.0, lt=1.0)
    horizon: int = Field(default=20, ge=1)
    intrinsic_weight: float = Field(default=1.0, ge=0.0)
    entropy_coef: float = Field(default=0.0, ge=0.0)
    value_coef: float = Field(default=0.5, ge=0.0)
    prediction_coef: float = Field(default=1.0, ge=0.0)
    gae_adjustment: Literal["tail", "renormalize"] = "tail"

    # rewards
    extrinsic: Literal["label", "native", "none"] = "label"
    intrinsic: Literal["cross_entropy", "none"] = "cross_entropy"
    floor: float = Field(default=1e-6, gt=0.0, le=1e-3)

    # optimization
    batch_size: int = Field(default=100, ge=1)
    updates: int = Field(default=1000, ge=0)
    learning_rate: float = Field(default=1e-4, ge=0.0)
    seed: int = Field(default=0, ge=0)
    precision: Literal["float64", "float32"] = "float64"
    rollout_chunk: int = Field(default=25, ge=1)
    threads: int = Field(default=0, ge=0)  # 0: ISK_THREADS

    # geometry
    canvas: int = Field(default=28, ge=4)
    block_size: int = Field(default=2, ge=1)
    clutter_count: int = Field(default=0, ge=0)
    patch_size: int = Field(default=8, ge=1)
    summary_factor: int = Field(default=0, ge=0)
    sizes: tuple[int, ...] = (12, 16)
    window: int = Field(default=16, ge=1)
    alphabet: int = 27
    x_model: Literal["bernoulli", "gaussian"] = "bernoulli"

    # architecture
    hidden: int = Field(default=512, ge=1)
    layers: int = Field(default=4, ge=1)
    depth: int = Field(default=0, ge=0)
    base_channels: int = Field(default=16, ge=1)
    max_channels: int = Field(default=128, ge=1)
    lstm_width: int = Field(default=256, ge=1)
    slope: float = Field(default=0.01, gt=0.0, lt=1.0)
    head_init: Literal["orthogonal", "zeros"] = "orthogonal"
    init_gain: float = Field(default=1.0, gt=0.0)

    # data and outputs
    images: str = "train-images-idx3-ubyte"
    labels: str = "train-labels-idx1-ubyte"
    test_images: str = "t10k-images-idx3-ubyte"
    test_labels: str = "t10k-labels-idx1-ubyte"
    corpus: str = "text8"
    features_csv: str = "features.csv"
    test_features_csv: str = ""
    metrics_path: str = "metrics.csv"
    checkpoint_path: str = "model.isk"
    dump_dir: str = "dumps"
    metrics_every: int = Field(default=50, ge=1)
    checkpoint_every: int = Field(default=0, ge=0)
    eval_episodes: int = Field(default=2000, ge=1)

    @field_validator("sizes", mode="before")
    @classmethod
    def parse_sizes(cls, value):
        if isinstance(value, str):
            return tuple(int(v) for v in value.split(",") if v.strip())
        return value

    @field_validator("alphabet")
    @classmethod
    def known_alphabet(cls, value):
        if value not in (26, 27):
            raise ValueError(f"alphabet must be 26 or 27, got {value}")
        return value

    @field_validator("task")
    @classmethod
    def known_task(cls, value):
        if value not in PRESETS:
            raise ValueError(f"unknown task '{value}', expected one of {sorted(PRESETS)}")
        return value

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        """Apply the task preset, then the explicit values."""
        unknown = sorted(set(values) - set(cls.model_fields))
        if unknown:
            raise ConfigError(f"unknown config key '{unknown[0]}'")
        task = values.get("task", cls.model_fields["task"].default)
        if task not in PRESETS:
            raise ConfigError(f"unknown task '{task}', expected one of {sorted(PRESETS)}")
        merged = {**PRESETS[task], **values, "task": task}
        try:
            return cls(**merged)
        except ValidationError as e:
            first = e.errors()[0]
            key = ".".join(str(p) for p in first["loc"]) or "config"
            raise ConfigError(f"invalid value for '{key}': {first['msg']}") from None

    def hyperparams(self) -> HyperParams:
        return HyperParams(
            gamma=self.gamma, lam=self.lam, horizon=self.horizon,
            intrinsic_weight=self.intrinsic_weight, entropy_coef=self.entropy_coef,
            value_coef=self.value_coef, prediction_coef=self.prediction_coef,
            gae_adjustment=self.gae_adjustment,
        )

    def reward_spec(self) -> RewardSpec:
        try:
            return RewardSpec(extrinsic=self.extrinsic, intrinsic=self.intrinsic, floor=self.floor)
        except ValidationError as e:
            raise ConfigError(e.errors()[0]["msg"]) from None

    def updated(self, **changes) -> "ExperimentConfig":
        values = self.model_dump()
        values.update(changes)
        return ExperimentConfig.from_mapping(values)

    def canonical_text(self, include_all: bool = False) -> str:
        """Sorted ``key=value`` lines; non-digest keys only with ``include_all``."""
        lines = []
        for key, value in sorted(self.model_dump().items()):
            if not include_all and key in NON_DIGEST_KEYS:
                continue
            lines.append(f"{key}={format_value(value)}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected key=value, got '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {number}: empty key")
        values[key] = value
    return values


def config_from_text(text: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    values = parse_config_text(text)
    values.update(overrides or {})
    return ExperimentConfig.from_mapping(values)


def load_config(path: Union[str, Path], overrides: Optional[dict] = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}") from None
    return config_from_text(text, overrides)

"""Build environments, models and acting policies from a config."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Literal, Optional

import numpy as np

from beliefnet import BeliefModel, build_model
from harness import rng as streams
from harness.config import ExperimentConfig
from harness.errors import ConfigError
from harness.policies import FrequencyPolicy, ModelPolicy, Policy, RandomPolicy
from harness.settings import get_settings
from numerics.errors import ShapeError
from worlds import (
    BlockWorldEnv, ClutteredDigitsEnv, Environment, FeatureDataset, FeatureEnv, HangmanEnv,
    load_corpus, load_features_csv, load_mnist, split_corpus,
)
from worlds.hangman import TRAIN_FRACTION

logger = logging.getLogger(__name__)

Split = Literal["train", "test"]


def data_path(name: str, data_dir: Optional[Path] = None) -> Path:
    path = Path(name)
    if path.is_absolute():
        return path
    return (data_dir or get_settings().data_dir) / path


def build_env(config: ExperimentConfig, split: Split = "train", data_dir: Optional[Path] = None) -> Environment:
    """Environment for ``split``; raises ConfigError when the horizon exceeds
    the question count."""
    if config.world == "cluttered":
        images, labels = (config.images, config.labels) if split == "train" else (config.test_images, config.test_labels)
        x, y = load_mnist(data_path(images, data_dir), data_path(labels, data_dir))
        env: Environment = ClutteredDigitsEnv(
            x, y, canvas_size=config.canvas, clutter_count=config.clutter_count,
            patch_size=config.patch_size, block_size=config.block_size,
            summary_factor=config.summary_factor or None,
        )
    elif config.world == "blockworld":
        # train and test scenes come from disjoint generator streams
        env = BlockWorldEnv(canvas=config.canvas, sizes=config.sizes, block_size=config.block_size)
    elif config.world == "hangman":
        corpus, _ = load_corpus(data_path(config.corpus, data_dir), config.alphabet)
        train, test = split_corpus(corpus)
        env = HangmanEnv(train if split == "train" else test, window=config.window, alphabet_size=config.alphabet)
    elif config.world == "features":
        dataset = load_features_csv(data_path(config.features_csv, data_dir))
        label_count = int(dataset.labels.max()) + 1
        if config.test_features_csv:
            if split == "test":
                dataset = load_features_csv(data_path(config.test_features_csv, data_dir))
                label_count = max(label_count, int(dataset.labels.max()) + 1)
        else:
            dataset = split_rows(dataset, split)
        env = FeatureEnv(dataset, label_count=label_count)
    else:
        raise ConfigError(f"unknown world '{config.world}'")
    check_horizon(config, env)
    logger.info("built %s environment: %s split, %d questions", env.name, split, env.space.count)
    return env


def split_rows(dataset: FeatureDataset, split: Split) -> FeatureDataset:
    """First 90% of rows for training, the rest for testing."""
    if len(dataset) < 2:
        raise ConfigError(f"need at least two feature rows to split, got {len(dataset)}")
    cut = min(max(int(len(dataset) * TRAIN_FRACTION), 1), len(dataset) - 1)
    rows = slice(0, cut) if split == "train" else slice(cut, None)
    return FeatureDataset(dataset.features[rows], dataset.labels[rows], dataset.columns)


def check_horizon(config: ExperimentConfig, env: Environment) -> None:
    if config.horizon > env.space.count:
        raise ConfigError(f"horizon {config.horizon} exceeds the {env.space.count} available questions")


def model_options(config: ExperimentConfig) -> dict:
    if config.architecture == "fc":
        return {"hidden": config.hidden, "layers": config.layers, "slope": config.slope,
                "head_init": config.head_init, "init_gain": config.init_gain}
    return {
        "depth": config.depth or None,
        "base_channels": config.base_channels,
        "max_channels": config.max_channels,
        "lstm_width": config.lstm_width,
        "slope": config.slope,
        "head_init": config.head_init,
        "init_gain": config.init_gain,
    }


def build_model_for(config: ExperimentConfig, env: Environment) -> BeliefModel:
    geometry = env.geometry()
    if geometry.x_model != config.x_model and config.world == "features":
        raise ConfigError(f"features data is modelled as '{geometry.x_model}', config says '{config.x_model}'")
    try:
        return build_model(config.architecture, geometry, streams.stream(config.seed, streams.INIT), **model_options(config))
    except (ShapeError, ValueError) as e:
        raise ConfigError(f"cannot build a {config.architecture} model for task {config.task}: {e}") from None


def check_compatible(model: BeliefModel, env: Environment) -> None:
    """Reject a model whose question space differs from the environment's."""
    cfg = model.config
    count = getattr(cfg, "question_count", None)
    if count is None:
        rows, cols = model.block_grid
        count = rows * cols
    if count != env.space.count:
        raise ShapeError(f"model covers {count} questions, environment has {env.space.count}")


def unigram_counts(env: Environment) -> np.ndarray:
    if not isinstance(env, HangmanEnv):
        raise ConfigError("the frequency baseline needs a text corpus")
    return np.bincount(env.corpus, minlength=env.space.count).astype(np.float64)


def make_policy(config: ExperimentConfig, env: Environment) -> Policy:
    if config.policy == "model":
        return ModelPolicy()
    if config.policy == "random":
        return RandomPolicy()
    return FrequencyPolicy(unigram_counts(env))


def baseline_full_observation(config: ExperimentConfig) -> ExperimentConfig:
    """Train on complete answer tables; π still masks the questions really asked."""
    return config.updated(full_observation=True, policy="model")

"""Build the belief model that fits an environment's question space."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from beliefnet.base import BeliefModel
from beliefnet.convnet import ConvBeliefNet, ConvNetConfig
from beliefnet.fcnet import FCBeliefNet, FCNetConfig

ARCHITECTURES = ("fc", "conv")


@dataclass(frozen=True)
class ModelGeometry:
    """Everything a model needs to know about a task."""

    question_count: int
    arity: int
    x_shape: tuple[int, ...]
    label_count: int = 0
    x_model: str = "bernoulli"
    image_shape: Optional[tuple[int, int, int]] = None
    block_size: Optional[int] = None
    summary_channels: int = 0
    summary_factor: int = 8
    statement_dim: int = 0


def build_model(architecture: str, geometry: ModelGeometry, rng: np.random.Generator, **options) -> BeliefModel:
    """``options`` are architecture hyperparameters (widths, depth, slope, ...)."""
    if architecture == "fc":
        config = FCNetConfig(
            question_count=geometry.question_count,
            arity=geometry.arity,
            x_shape=tuple(geometry.x_shape),
            label_count=geometry.label_count,
            x_model=geometry.x_model,
            **options,
        )
        return FCBeliefNet(config, rng)
    if architecture == "conv":
        if geometry.image_shape is None or geometry.block_size is None:
            raise ValueError("the conv architecture needs an image question space")
        config = ConvNetConfig(
            image_shape=tuple(geometry.image_shape),
            block_size=geometry.block_size,
            label_count=geometry.label_count,
            summary_channels=geometry.summary_channels,
            summary_factor=geometry.summary_factor,
            statement_dim=geometry.statement_dim,
            x_model=geometry.x_model,
            **options,
        )
        return ConvBeliefNet(config, rng)
    raise ValueError(f"unknown architecture '{architecture}', expected one of {ARCHITECTURES}")

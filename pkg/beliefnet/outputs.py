"""Per-step belief bundle and optional conditioning inputs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from numerics.tensor import Tensor

STATEMENT_DIM = 20


@dataclass
class BeliefOutputs:
    """What a belief model says after seeing a history (batched on axis 0).

    ``reconstruction`` has the shape of the observable x per example;
    ``labels`` is None for tasks without a target; ``policy`` holds exact
    zeros on asked questions and ``log_policy`` holds 0 there.
    """

    reconstruction: Tensor
    labels: Optional[Tensor]
    value: Tensor
    policy: Tensor
    log_policy: Tensor
    pixel_logits: Optional[Tensor] = None

    @property
    def batch(self) -> int:
        return self.value.shape[0]


@dataclass
class Conditioning:
    """Side information fed to the belief model alongside the history."""

    statement: Optional[np.ndarray] = None
    summary: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.statement is not None:
            self.statement = np.asarray(self.statement, dtype=np.float64).reshape(-1)
        if self.summary is not None:
            self.summary = np.asarray(self.summary, dtype=np.float64)

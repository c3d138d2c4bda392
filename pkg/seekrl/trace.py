"""Per-episode record of what was asked, answered and rewarded."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np


@dataclass
class EpisodeTrace:
    """Step t (0-based) records the choice made at history h_{:t}.

    ``values[t]`` is V(h_{:t}); the value after the last step is 0.
    ``intrinsic_levels`` has one entry more than the step count: the level
    before any question, then one after each answer.
    """

    questions: list[int]
    answers: list[np.ndarray]
    log_probs: np.ndarray
    values: np.ndarray
    extrinsic: np.ndarray
    intrinsic_levels: np.ndarray
    intrinsic: np.ndarray
    policies: Optional[np.ndarray] = None
    label_probs: Optional[np.ndarray] = None
    label: Optional[int] = None
    episode_index: int = 0
    terminated_early: bool = False
    notes: dict = field(default_factory=dict)
    # replay context
    history: Any = None
    target: Optional[np.ndarray] = None
    conditioning: Any = None
    observed: Any = None
    reconstructions: Optional[list[np.ndarray]] = None

    def __post_init__(self):
        T = len(self.questions)
        for name in ("log_probs", "values", "extrinsic", "intrinsic"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (T,):
                raise ValueError(f"trace field '{name}' has shape {arr.shape}, expected ({T},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"trace field '{name}' contains non-finite values")
            setattr(self, name, arr)
        levels = np.asarray(self.intrinsic_levels, dtype=np.float64)
        if levels.shape != (T + 1,):
            raise ValueError(f"intrinsic levels have shape {levels.shape}, expected ({T + 1},)")
        self.intrinsic_levels = levels
        if np.any(self.log_probs > 0.0):
            raise ValueError("log-probabilities must be <= 0")

    def __len__(self) -> int:
        return len(self.questions)

    @property
    def rewards(self) -> np.ndarray:
        return self.extrinsic + self.intrinsic

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())

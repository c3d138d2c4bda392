"""Environment interface shared by every task."""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from beliefnet.factory import ModelGeometry
from beliefnet.history import TrialHistory
from beliefnet.outputs import Conditioning
from worlds.errors import QuestionError

MAX_QUESTIONS = 1000


@dataclass(frozen=True)
class Example:
    """Observable x plus the unobservable target y (None when absent)."""

    x: np.ndarray
    y: Optional[int] = None
    meta: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class QuestionSpace:
    count: int
    arity: int
    image_shape: Optional[tuple[int, int, int]] = None
    block_size: Optional[int] = None

    def __post_init__(self):
        if not 1 <= self.count < MAX_QUESTIONS:
            raise ValueError(f"question count {self.count} outside [1, {MAX_QUESTIONS})")
        if self.arity < 1:
            raise ValueError(f"answer arity must be positive, got {self.arity}")


class Environment(ABC):
    """Generator of examples plus a deterministic observation function.

    Questions address x only. Environments are immutable after construction,
    so one instance serves concurrent episodes.
    """

    name: str = "base"
    reward_kind: str = "label"
    x_model: str = "bernoulli"
    label_count: int = 0
    space: QuestionSpace

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> Example:
        """Draw one example."""

    @abstractmethod
    def observe(self, x: np.ndarray, question: int) -> np.ndarray:
        """Answer to ``question`` about x; identical on every call."""

    def answer_table(self, x: np.ndarray) -> np.ndarray:
        return np.stack([self.observe(x, q) for q in range(self.space.count)])

    def recon_target(self, example: Example) -> np.ndarray:
        """The array f^x is scored against; defaults to x itself."""
        return np.asarray(example.x, dtype=np.float64)

    @property
    def x_shape(self) -> tuple[int, ...]:
        raise NotImplementedError

    def conditioning(self, example: Example) -> Optional[Conditioning]:
        return None

    def native_reward(self, example: Example, question: int, answer: np.ndarray) -> float:
        return 0.0

    def is_done(self, example: Example, history: TrialHistory) -> bool:
        return False

    def question_label(self, question: int) -> str:
        return str(question)

    def geometry(self) -> ModelGeometry:
        return ModelGeometry(
            question_count=self.space.count,
            arity=self.space.arity,
            x_shape=tuple(self.x_shape),
            label_count=self.label_count,
            x_model=self.x_model,
            image_shape=self.space.image_shape,
            block_size=self.space.block_size,
        )


class Episode:
    """Per-episode cursor: owns the history and enforces question masking."""

    def __init__(self, env: Environment, example: Example):
        self.env = env
        self.example = example
        self.history = TrialHistory(env.space.count, env.space.arity)

    def ask(self, question: int) -> tuple[np.ndarray, float]:
        question = int(question)
        if not 0 <= question < self.env.space.count:
            raise QuestionError(f"question {question} outside [0, {self.env.space.count})")
        if self.history.asked[question]:
            raise QuestionError(f"question {question} was already asked")
        answer = self.env.observe(self.example.x, question)
        self.history.ask(question, answer)
        return answer, self.env.native_reward(self.example, question, answer)

    @property
    def done(self) -> bool:
        return bool(self.history.asked.all()) or self.env.is_done(self.example, self.history)

    def __len__(self) -> int:
        return len(self.history)

"""Question-selection policies: the model's π and the baselines."""
from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np


class Policy(ABC):
    name: str = "policy"
    trains_policy_head = False

    @abstractmethod
    def distribution(self, model_probs: np.ndarray, asked: np.ndarray) -> np.ndarray:
        """Probabilities over all questions, zero on asked ones."""

    def choose(self, model_probs: np.ndarray, asked: np.ndarray, rng: np.random.Generator, greedy: bool = False) -> tuple[int, float]:
        """Question id and the log-probability the policy assigned to it."""
        probs = self.distribution(model_probs, asked)
        if greedy:
            question = int(np.argmax(probs))
        else:
            question = int(rng.choice(probs.size, p=probs))
        return question, float(np.log(probs[question]))


class ModelPolicy(Policy):
    name = "model"
    trains_policy_head = True

    def distribution(self, model_probs, asked):
        probs = np.asarray(model_probs, dtype=np.float64).copy()
        probs[np.asarray(asked, dtype=bool)] = 0.0
        return probs / probs.sum()


class RandomPolicy(Policy):
    """Uniform over unasked questions."""

    name = "random"

    def distribution(self, model_probs, asked):
        allowed = ~np.asarray(asked, dtype=bool)
        return allowed / allowed.sum()

    def choose(self, model_probs, asked, rng, greedy=False):
        return super().choose(model_probs, asked, rng, greedy=False)


class FrequencyPolicy(Policy):
    """Unasked symbols in proportion to corpus unigram counts; uniform over
    the unasked ones once every remaining count is zero."""

    name = "freq"

    def __init__(self, counts: np.ndarray):
        self.counts = np.asarray(counts, dtype=np.float64)

    def distribution(self, model_probs, asked):
        allowed = ~np.asarray(asked, dtype=bool)
        weights = np.where(allowed, self.counts, 0.0)
        if weights.sum() == 0.0:
            weights = allowed.astype(np.float64)
        return weights / weights.sum()

    def choose(self, model_probs, asked, rng, greedy=False):
        return super().choose(model_probs, asked, rng, greedy=False)


def baseline_random() -> RandomPolicy:
    return RandomPolicy()


def baseline_frequency(corpus: np.ndarray, alphabet_size: int = 27) -> FrequencyPolicy:
    return FrequencyPolicy(np.bincount(np.asarray(corpus, dtype=np.int64), minlength=alphabet_size))

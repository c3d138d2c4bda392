"""Counter-based random streams.

Every stream is a Philox generator seeded from (seed, purpose, *counters)
through a SeedSequence, so an episode's randomness depends only on the run
seed, the update index and the episode index, never on scheduling.
"""
import numpy as np

INIT = 0
ROLLOUT = 1
EVALUATION = 2
GENERATION = 3
SELFTEST = 4


def stream(seed: int, purpose: int, *counters: int) -> np.random.Generator:
    entropy = [int(seed), int(purpose), *(int(c) for c in counters)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def episode_rng(seed: int, update: int, episode: int) -> np.random.Generator:
    return stream(seed, ROLLOUT, update, episode)


def evaluation_rng(seed: int, episode: int) -> np.random.Generator:
    return stream(seed, EVALUATION, episode)

"""Episode rollout and replay.

A minibatch is cut into fixed chunks of ``rollout_chunk`` episodes and each
chunk runs batched through the model. Threads only decide which worker runs
a chunk; results are reassembled in episode-index order, so the output never
depends on the thread count.

Within a chunk every episode draws its example first and then its actions
from its own generator (``rng.episode_rng``).
"""
from __future__ import annotations

import contextvars
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from beliefnet import BeliefModel, Conditioning, TrialHistory
from harness import rng as streams
from harness.config import ExperimentConfig
from harness.errors import ConfigError
from harness.policies import ModelPolicy, Policy
from harness.tasks import check_compatible
from seekrl import EpisodeTrace, extrinsic_label_reward, intrinsic_level, per_question_intrinsic
from worlds import Environment, Episode, Example

logger = logging.getLogger(__name__)


def chunk_bounds(count: int, chunk: int) -> list[tuple[int, int]]:
    return [(start, min(start + chunk, count)) for start in range(0, count, chunk)]


def check_rewards(config: ExperimentConfig, env: Environment) -> None:
    if config.extrinsic == "label" and not env.label_count:
        raise ConfigError(f"extrinsic=label needs a labelled task, '{env.name}' has no labels")


def conditioning_batch(conditionings: Sequence[Optional[Conditioning]]) -> Optional[list]:
    return list(conditionings) if any(c is not None for c in conditionings) else None


def observed_history(env: Environment, example: Example) -> TrialHistory:
    """Every answer revealed, used as model input in full-observation mode."""
    return TrialHistory.complete(env.answer_table(example.x))


def _run_chunk(
    env: Environment,
    model: BeliefModel,
    config: ExperimentConfig,
    policy: Policy,
    indices: Sequence[int],
    rngs: Sequence[np.random.Generator],
    greedy: bool,
    keep_reconstructions: bool,
) -> list[EpisodeTrace]:
    n = len(indices)
    examples = [env.sample(r) for r in rngs]
    episodes = [Episode(env, ex) for ex in examples]
    conditionings = [env.conditioning(ex) for ex in examples]
    conds = conditioning_batch(conditionings)
    observed = [observed_history(env, ex) for ex in examples] if config.full_observation else None
    targets = [env.recon_target(ex) for ex in examples]

    log_probs = [[] for _ in range(n)]
    values = [[] for _ in range(n)]
    extrinsic = [[] for _ in range(n)]
    levels = [[] for _ in range(n)]
    policies = [[] for _ in range(n)]
    label_probs = [[] for _ in range(n)]
    recons = [[] for _ in range(n)]
    pending_native = [0.0] * n
    finished = [False] * n

    state = model.initial_state(n)
    for t in range(config.horizon + 1):
        outputs, state = model.step([e.history for e in episodes], state, conds, observed, allow_exhausted=True)
        recon = outputs.reconstruction.values
        labels = outputs.labels.values if outputs.labels is not None else None
        probs = outputs.policy.values
        value = outputs.value.values
        for i, episode in enumerate(episodes):
            if finished[i]:
                continue
            levels[i].append(intrinsic_level(recon[i], targets[i], env.x_model, config.floor))
            if labels is not None:
                label_probs[i].append(labels[i].astype(np.float64))
            if keep_reconstructions:
                recons[i].append(recon[i].astype(np.float64))
            if t > 0:
                if config.extrinsic == "label":
                    extrinsic[i].append(extrinsic_label_reward(labels[i], examples[i].y, config.floor))
                elif config.extrinsic == "native":
                    extrinsic[i].append(pending_native[i])
                else:
                    extrinsic[i].append(0.0)
            if t == config.horizon or episode.done:
                finished[i] = True
                continue
            question, log_prob = policy.choose(probs[i], episode.history.asked, rngs[i], greedy)
            _, pending_native[i] = episode.ask(question)
            log_probs[i].append(log_prob)
            values[i].append(float(value[i]))
            policies[i].append(probs[i].astype(np.float64))
        if all(finished):
            break

    traces = []
    for i, episode in enumerate(episodes):
        lv = np.asarray(levels[i])
        if config.intrinsic == "cross_entropy":
            intrinsic = per_question_intrinsic(lv, config.intrinsic_weight)
        else:
            intrinsic = np.zeros(len(episode))
        traces.append(EpisodeTrace(
            questions=list(episode.history.questions),
            answers=list(episode.history.answers),
            log_probs=np.asarray(log_probs[i]),
            values=np.asarray(values[i]),
            extrinsic=np.asarray(extrinsic[i]),
            intrinsic_levels=lv,
            intrinsic=intrinsic,
            policies=np.asarray(policies[i]).reshape(len(episode), env.space.count),
            label_probs=np.asarray(label_probs[i]) if label_probs[i] else None,
            label=examples[i].y,
            episode_index=int(indices[i]),
            terminated_early=len(episode) < config.horizon,
            notes=dict(examples[i].meta),
            history=episode.history,
            target=targets[i],
            conditioning=conditionings[i],
            observed=observed[i] if observed is not None else None,
            reconstructions=recons[i] if keep_reconstructions else None,
        ))
    return traces


def run_episodes(
    env: Environment,
    model: BeliefModel,
    config: ExperimentConfig,
    rngs: Sequence[np.random.Generator],
    policy: Optional[Policy] = None,
    greedy: bool = False,
    keep_reconstructions: bool = False,
    threads: int = 1,
    first_index: int = 0,
) -> list[EpisodeTrace]:
    """One episode per generator, in chunks of ``config.rollout_chunk``."""
    check_rewards(config, env)
    check_compatible(model, env)
    policy = policy or ModelPolicy()
    bounds = chunk_bounds(len(rngs), config.rollout_chunk)

    def job(bound):
        start, stop = bound
        return _run_chunk(
            env, model, config, policy, range(first_index + start, first_index + stop),
            rngs[start:stop], greedy, keep_reconstructions,
        )

    if threads <= 1 or len(bounds) <= 1:
        results = [job(b) for b in bounds]
    else:
        # each worker inherits the caller's precision setting
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(contextvars.copy_context().run, job, b) for b in bounds]
            results = [f.result() for f in futures]
    return [trace for chunk in results for trace in chunk]


def rollout_minibatch(
    env: Environment,
    model: BeliefModel,
    config: ExperimentConfig,
    update: int,
    policy: Optional[Policy] = None,
    threads: int = 1,
) -> list[EpisodeTrace]:
    """``config.batch_size`` sampled episodes for training update ``update``."""
    rngs = [streams.episode_rng(config.seed, update, e) for e in range(config.batch_size)]
    return run_episodes(env, model, config, rngs, policy=policy, threads=threads)


def replay_episode(model: BeliefModel, trace: EpisodeTrace) -> list:
    """Beliefs after each prefix of a recorded episode, h_{:0} .. h_{:T}.

    Run at batch size 1 with the same parameters and precision, the outputs
    match those recorded by a batch-1 rollout bit for bit.
    """
    if trace.history is None:
        raise ValueError("trace carries no history to replay")
    conds = [trace.conditioning] if trace.conditioning is not None else None
    observed = [trace.observed] if trace.observed is not None else None
    state = model.initial_state(1)
    beliefs = []
    for t in range(len(trace) + 1):
        outputs, state = model.step([trace.history.prefix(t)], state, conds, observed, allow_exhausted=True)
        beliefs.append(outputs)
    return beliefs

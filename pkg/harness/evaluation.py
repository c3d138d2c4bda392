"""Held-out evaluation and its CSV report."""
from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import numpy as np

from beliefnet import BeliefModel
from harness import rng as streams
from harness.config import ExperimentConfig
from harness.errors import ConfigError
from harness.policies import Policy
from harness.rollout import run_episodes
from harness.schemas import EvaluationReport
from seekrl import EpisodeTrace
from worlds import Environment, HangmanEnv

logger = logging.getLogger(__name__)

Mode = Literal["greedy", "sample"]
Z_95 = 1.959963984540054


def belief_curves(traces: Sequence[EpisodeTrace], horizon: int) -> tuple[list[float], list[float]]:
    """Mean label accuracy and reconstruction NLL after t = 0..horizon answers.

    An episode that ended early contributes its final belief to later steps.
    Accuracy is empty for unlabelled tasks.
    """
    accuracy, nll = [], []
    labelled = [t for t in traces if t.label_probs is not None and t.label is not None]
    for t in range(horizon + 1):
        nll.append(float(np.mean([-tr.intrinsic_levels[min(t, len(tr))] for tr in traces])))
        if labelled:
            hits = [int(np.argmax(tr.label_probs[min(t, len(tr))])) == tr.label for tr in labelled]
            accuracy.append(float(np.mean(hits)))
    return accuracy, nll


def hangman_outcomes(traces: Sequence[EpisodeTrace]) -> tuple[np.ndarray, np.ndarray]:
    """Per episode: whether every position was revealed, and the wrong-guess count."""
    completed, wrong = [], []
    for tr in traces:
        answers = np.asarray(tr.answers)
        completed.append(bool(answers.size) and bool(np.all(answers.sum(axis=0) > 0)))
        wrong.append(int(sum(1 for a in tr.answers if not np.any(a))))
    return np.array(completed, dtype=bool), np.array(wrong, dtype=np.int64)


def completion_cdf(completed: np.ndarray, wrong: np.ndarray, max_wrong: int) -> list[float]:
    """Fraction of games completed with at most k wrong guesses, k = 0..max_wrong."""
    n = len(completed)
    return [float(np.sum(completed & (wrong <= k)) / n) for k in range(max_wrong + 1)]


def evaluate(
    model: BeliefModel,
    env: Environment,
    config: ExperimentConfig,
    episodes: int,
    mode: Mode = "greedy",
    policy: Optional[Policy] = None,
    threads: int = 1,
) -> EvaluationReport:
    if episodes < 1:
        raise ConfigError(f"evaluation needs at least one episode, got {episodes}")
    if mode not in ("greedy", "sample"):
        raise ConfigError(f"unknown evaluation mode '{mode}', expected greedy or sample")
    rngs = [streams.evaluation_rng(config.seed, e) for e in range(episodes)]
    traces = run_episodes(env, model, config, rngs, policy=policy, greedy=mode == "greedy", threads=threads)

    rewards = np.array([t.total_reward for t in traces])
    ci = float(Z_95 * rewards.std(ddof=1) / np.sqrt(episodes)) if episodes > 1 else 0.0
    accuracy, nll = belief_curves(traces, config.horizon)
    report = EvaluationReport(
        task=config.task,
        mode=mode,
        policy=policy.name if policy is not None else "model",
        episodes=episodes,
        mean_reward=float(rewards.mean()),
        reward_ci95=ci,
        mean_length=float(np.mean([len(t) for t in traces])),
        accuracy_at_t=accuracy,
        nll_at_t=nll,
        final_accuracy=float(np.mean([
            int(np.argmax(t.label_probs[-1])) == t.label for t in traces
        ])) if accuracy else None,
    )
    if isinstance(env, HangmanEnv):
        completed, wrong = hangman_outcomes(traces)
        report.completion_cdf = completion_cdf(completed, wrong, env.space.count)
        report.completion_rate = float(completed.mean())
    logger.info(
        "evaluated %d %s episodes of %s: mean reward %.4f ± %.4f",
        episodes, mode, config.task, report.mean_reward, report.reward_ci95,
    )
    return report


def report_rows(report: EvaluationReport) -> list[tuple[str, str, str]]:
    rows = [
        ("task", "", report.task),
        ("mode", "", report.mode),
        ("policy", "", report.policy),
        ("episodes", "", str(report.episodes)),
        ("mean_reward", "", repr(report.mean_reward)),
        ("reward_ci95", "", repr(report.reward_ci95)),
        ("mean_length", "", repr(report.mean_length)),
    ]
    if report.final_accuracy is not None:
        rows.append(("final_accuracy", "", repr(report.final_accuracy)))
    if report.completion_rate is not None:
        rows.append(("completion_rate", "", repr(report.completion_rate)))
    for name in ("accuracy_at_t", "nll_at_t", "completion_cdf"):
        rows.extend((name, str(t), repr(v)) for t, v in enumerate(getattr(report, name)))
    return rows


def write_report_csv(report: EvaluationReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("metric", "t", "value"))
        writer.writerows(report_rows(report))
    return path

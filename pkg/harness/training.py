"""One training update and the update loop around it.

An update rolls out a minibatch without recording, then replays each rollout
chunk with a computation record active (feeding the recorded answers through any
recurrent state) and accumulates parameter gradients across chunks before a
single Adam step. Loss terms are averaged over the minibatch:

    total = (policy + value_coef * td + prediction_coef * prediction) / B
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from beliefnet import BeliefModel
from harness.checkpoint import Checkpoint, save_checkpoint
from harness.config import ExperimentConfig
from harness.errors import NonFiniteLossError
from harness.evaluation import belief_curves
from harness.policies import ModelPolicy, Policy
from harness.rollout import chunk_bounds, conditioning_batch, rollout_minibatch
from harness.schemas import MetricsRow
from numerics import ComputationRecord, NonFiniteError, Tensor, ops
from numerics.optim import AdamState, adam_step
from seekrl import (
    EpisodeTrace, HyperParams, RewardSpec, gae_advantages, label_log_likelihood, lambda_targets,
    policy_loss, prediction_loss, reconstruction_log_likelihood, td_lambda_loss,
)
from worlds import Environment, write_jsonl

logger = logging.getLogger(__name__)

EventHook = Callable[[str, dict], None]


@dataclass
class LossParts:
    policy: float = 0.0
    value: float = 0.0
    prediction: float = 0.0

    @property
    def total(self) -> float:
        return self.policy + self.value + self.prediction


def _padded(rows: Sequence[np.ndarray], width: int) -> np.ndarray:
    out = np.zeros((len(rows), width))
    for i, row in enumerate(rows):
        out[i, :len(row)] = row
    return out


def step_mask(traces: Sequence[EpisodeTrace], width: int) -> np.ndarray:
    """(B, width) with 1 where step t < episode length."""
    lengths = np.array([len(t) for t in traces])
    return (np.arange(width)[None, :] < lengths[:, None]).astype(np.float64)


def _prediction_term(outputs, traces, reward: RewardSpec, hp: HyperParams, x_model: str) -> Optional[Tensor]:
    terms = []
    if reward.extrinsic == "label" and outputs.labels is not None:
        terms.append(label_log_likelihood(outputs.labels, [t.label for t in traces], reward.floor))
    if reward.intrinsic == "cross_entropy" and hp.intrinsic_weight:
        targets = np.stack([t.target for t in traces])
        recon = reconstruction_log_likelihood(outputs.reconstruction, targets, x_model, reward.floor)
        terms.append(ops.scale(recon, hp.intrinsic_weight))
    if not terms:
        return None
    return terms[0] if len(terms) == 1 else ops.add(*terms)


def chunk_losses(
    model: BeliefModel,
    traces: Sequence[EpisodeTrace],
    hp: HyperParams,
    reward: RewardSpec,
    trains_policy: bool = True,
) -> dict[str, Tensor]:
    """Replay ``traces`` as one batch and return the summed (unscaled) losses.

    Must run with a computation record active for gradients to flow.
    """
    width = max(len(t) for t in traces)
    x_model = model.config.x_model
    conds = conditioning_batch([t.conditioning for t in traces])
    observed = [t.observed for t in traces] if traces[0].observed is not None else None
    mask = step_mask(traces, width)

    values, log_probs, entropies, predictions = [], [], [], []
    state = model.initial_state(len(traces))
    for t in range(width + 1):
        histories = [tr.history.prefix(min(t, len(tr))) for tr in traces]
        outputs, state = model.step(histories, state, conds, observed, allow_exhausted=True)
        if t < width:
            values.append(outputs.value)
            if trains_policy:
                chosen = [tr.questions[t] if t < len(tr) else 0 for tr in traces]
                log_probs.append(ops.pick(outputs.log_policy, chosen))
                if hp.entropy_coef:
                    entropies.append(ops.entropy(outputs.policy, outputs.log_policy))
        if t > 0:
            term = _prediction_term(outputs, traces, reward, hp, x_model)
            if term is not None:
                predictions.append(term)

    targets = _padded([lambda_targets(tr, hp) for tr in traces], width)
    losses = {"value": td_lambda_loss(ops.stack(values, axis=1), targets, mask)}
    if log_probs:
        advantages = _padded([gae_advantages(tr, hp) for tr in traces], width)
        entropy = ops.stack(entropies, axis=1) if entropies else None
        losses["policy"] = policy_loss(ops.stack(log_probs, axis=1), advantages, entropy, hp.entropy_coef, mask)
    if predictions:
        losses["prediction"] = prediction_loss(ops.stack(predictions, axis=1), mask)
    return losses


def dump_traces(traces: Sequence[EpisodeTrace], dump_dir: Path, update: int) -> Path:
    dump_dir.mkdir(parents=True, exist_ok=True)
    path = dump_dir / f"nonfinite-update{update:06d}.jsonl"
    write_jsonl(path, (
        {
            "episode": t.episode_index,
            "questions": [int(q) for q in t.questions],
            "log_probs": t.log_probs.tolist(),
            "values": t.values.tolist(),
            "extrinsic": t.extrinsic.tolist(),
            "intrinsic_levels": t.intrinsic_levels.tolist(),
            "label": t.label,
        }
        for t in traces
    ))
    return path


def train_step(
    traces: Sequence[EpisodeTrace],
    model: BeliefModel,
    config: ExperimentConfig,
    optimizer: AdamState,
    update: int,
    policy: Optional[Policy] = None,
) -> MetricsRow:
    """Accumulate gradients over ``traces`` in rollout-chunk order and apply
    one Adam step. Raises NonFiniteLossError after dumping the traces when
    the loss or a gradient is not finite."""
    hp = config.hyperparams()
    reward = config.reward_spec()
    trains_policy = (policy or ModelPolicy()).trains_policy_head
    started = time.perf_counter()
    B = len(traces)

    model.parameters.zero_grad()
    parts = LossParts()
    for start, stop in chunk_bounds(B, config.rollout_chunk):
        with ComputationRecord() as record:
            losses = chunk_losses(model, traces[start:stop], hp, reward, trains_policy)
            weighted = [ops.scale(losses["value"], hp.value_coef)]
            if "policy" in losses:
                weighted.append(losses["policy"])
            if "prediction" in losses:
                weighted.append(ops.scale(losses["prediction"], hp.prediction_coef))
            total = ops.scale(ops.add(*weighted) if len(weighted) > 1 else weighted[0], 1.0 / B)
            if not np.isfinite(total.item()):
                path = dump_traces(traces, Path(config.dump_dir), update)
                raise NonFiniteLossError(f"non-finite loss at update {update}", str(path))
            record.backward(total)
        parts.value += hp.value_coef * losses["value"].item() / B
        parts.policy += losses["policy"].item() / B if "policy" in losses else 0.0
        parts.prediction += hp.prediction_coef * losses["prediction"].item() / B if "prediction" in losses else 0.0

    try:
        adam_step(model.parameters, model.parameters.grads(), optimizer)
    except NonFiniteError as e:
        path = dump_traces(traces, Path(config.dump_dir), update)
        raise NonFiniteLossError(f"update {update}: {e}", str(path)) from e

    accuracy, nll = belief_curves(traces, config.horizon)
    return MetricsRow(
        update=update,
        mean_reward=float(np.mean([t.total_reward for t in traces])),
        mean_extrinsic=float(np.mean([t.extrinsic.sum() for t in traces])),
        mean_intrinsic=float(np.mean([t.intrinsic.sum() for t in traces])),
        policy_loss=parts.policy,
        value_loss=parts.value,
        prediction_loss=parts.prediction,
        total_loss=parts.total,
        mean_length=float(np.mean([len(t) for t in traces])),
        accuracy_at_t=accuracy,
        nll_at_t=nll,
        wall_clock=time.perf_counter() - started,
    )


def prepare_metrics_file(path: Path, start_update: int) -> None:
    """Fresh file with a header, or on resume the rows up to ``start_update``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    kept = []
    if start_update and path.exists():
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        kept = [row for row in rows[1:] if row and int(row[0]) <= start_update]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MetricsRow.CSV_FIELDS)
        writer.writerows(kept)


def append_metrics(path: Path, rows: Sequence[MetricsRow]) -> None:
    with open(path, "a", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        for row in rows:
            writer.writerow(row.csv_cells())


@dataclass
class Trainer:
    """Runs updates ``start_update + 1 .. config.updates``.

    Metrics are kept in memory every update and appended to the CSV every
    ``metrics_every`` updates and at the end. A checkpoint is written every
    ``checkpoint_every`` updates (when nonzero) and after the last update.
    """

    config: ExperimentConfig
    env: Environment
    model: BeliefModel
    optimizer: Optional[AdamState] = None
    start_update: int = 0
    policy: Optional[Policy] = None
    threads: int = 1
    metrics_path: Optional[Path] = None
    checkpoint_path: Optional[Path] = None
    on_event: Optional[EventHook] = None
    history: list[MetricsRow] = field(default_factory=list)

    def __post_init__(self):
        if self.optimizer is None:
            self.optimizer = AdamState(lr=self.config.learning_rate)
        self.update = self.start_update

    def _emit(self, event: str, details: dict) -> None:
        if self.on_event is not None:
            self.on_event(event, details)

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(
            config=self.config,
            parameters=self.model.parameters.values(),
            adam=self.optimizer,
            seed=self.config.seed,
            update=self.update,
        )

    def save(self) -> None:
        if self.checkpoint_path is None:
            return
        save_checkpoint(self.checkpoint_path, self.checkpoint())
        self._emit("checkpoint_saved", {"update": self.update, "path": str(self.checkpoint_path)})

    def flush(self, pending: list[MetricsRow]) -> None:
        if not pending:
            return
        if self.metrics_path is not None:
            append_metrics(self.metrics_path, pending)
        last = pending[-1]
        logger.info(
            "update %d: mean reward %.4f, total loss %.4f, mean length %.2f",
            last.update, last.mean_reward, last.total_loss, last.mean_length,
        )
        self._emit("metrics_flushed", {"update": last.update, "mean_reward": last.mean_reward})
        pending.clear()

    def run(self, updates: Optional[int] = None) -> list[MetricsRow]:
        last = self.config.updates if updates is None else updates
        if self.metrics_path is not None:
            prepare_metrics_file(self.metrics_path, self.start_update)
        pending: list[MetricsRow] = []
        while self.update < last:
            update = self.update + 1
            traces = rollout_minibatch(self.env, self.model, self.config, update, self.policy, self.threads)
            row = train_step(traces, self.model, self.config, self.optimizer, update, self.policy)
            self.update = update
            self.history.append(row)
            pending.append(row)
            if update % self.config.metrics_every == 0:
                self.flush(pending)
            if self.config.checkpoint_every and update % self.config.checkpoint_every == 0:
                self.save()
        self.flush(pending)
        self.save()
        return self.history

"""Jobs behind the CLI subcommands, each tracked in the run ledger."""
from __future__ import annotations

import json
import logging
import traceback
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Literal, Optional

from sqlalchemy.orm import Session

from database.models import ExperimentRun, RunEvent, utcnow
from harness import rng as streams
from harness.checkpoint import Checkpoint, load_checkpoint
from harness.config import PRESETS, ExperimentConfig
from harness.errors import ConfigError
from harness.evaluation import evaluate, write_report_csv
from harness.policies import FrequencyPolicy, RandomPolicy
from harness.rollout import run_episodes
from harness.selftest import SelftestFailure, format_table, run_selftest
from harness.settings import get_settings
from harness.tasks import baseline_full_observation, build_env, build_model_for, make_policy, unigram_counts
from harness.traces import emit_trace
from harness.training import Trainer
from numerics import precision
from worlds import write_jsonl, write_pgm

logger = logging.getLogger(__name__)


class BaseJob(ABC):
    """Lifecycle wrapper shared by every job.

    ``execute`` records the run as running, then completed or failed with the
    error message and traceback, and returns a summary dict.
    """

    def __init__(self, db: Session, job_name: str):
        self.db = db
        self.job_name = job_name
        self.run: Optional[ExperimentRun] = None
        self.updates_completed = 0
        self.episodes_processed = 0

    def describe(self) -> dict:
        """Task, config digest and seed recorded with the run."""
        return {}

    def start_run(self, trigger: str = "cli") -> ExperimentRun:
        self.run = ExperimentRun(job_name=self.job_name, trigger=trigger, status="running", **self.describe())
        self.db.add(self.run)
        self.db.commit()
        self.db.refresh(self.run)
        return self.run

    def _finish(self, status: str) -> None:
        self.run.status = status
        self.run.completed_at = utcnow()
        self.run.updates_completed = self.updates_completed
        self.run.episodes_processed = self.episodes_processed

    def complete_run(self) -> None:
        if self.run:
            self._finish("completed")
            self.db.commit()

    def fail_run(self, error: Exception) -> None:
        if self.run:
            self._finish("failed")
            self.run.error_message = f"{type(error).__name__}: {error}"
            self.run.error_traceback = traceback.format_exc()
            self.db.commit()

    def log_event(self, event: str, details: Optional[dict] = None) -> Optional[RunEvent]:
        if self.run is None:
            return None
        entry = RunEvent(run_id=self.run.id, event=event, details=json.dumps(details, sort_keys=True) if details else None)
        self.db.add(entry)
        self.db.commit()
        return entry

    @abstractmethod
    def run_job(self) -> dict:
        """Do the work and return a JSON-friendly summary."""

    def execute(self, trigger: str = "cli") -> dict:
        self.start_run(trigger)
        try:
            result = self.run_job()
            self.complete_run()
            return {"success": True, "run_id": self.run.id, "result": result}
        except Exception as e:
            logger.debug("job %s failed", self.job_name, exc_info=True)
            self.fail_run(e)
            return {
                "success": False,
                "run_id": self.run.id if self.run else None,
                "error": str(e),
                "error_type": type(e).__name__,
            }


class ConfiguredJob(BaseJob):
    def __init__(self, db: Session, job_name: str, config: ExperimentConfig, threads: Optional[int] = None,
                 data_dir: Optional[Path] = None):
        super().__init__(db, job_name)
        self.config = config
        self.threads = threads or config.threads or get_settings().threads
        self.data_dir = data_dir

    def describe(self) -> dict:
        return {"task": self.config.task, "config_digest": self.config.digest(), "seed": self.config.seed}


class TrainJob(ConfiguredJob):
    def __init__(self, db: Session, config: ExperimentConfig, resume: Optional[Path] = None, **kwargs):
        super().__init__(db, "train", config, **kwargs)
        self.resume = resume

    def run_job(self) -> dict:
        config = self.config
        with precision(config.precision):
            env = build_env(config, "train", self.data_dir)
            model = build_model_for(config, env)
            optimizer, start = None, 0
            if self.resume is not None:
                checkpoint = load_checkpoint(self.resume, expected_digest=config.digest())
                optimizer, start = checkpoint.restore(model), checkpoint.update
                self.log_event("resumed", {"update": start, "path": str(self.resume)})
            trainer = Trainer(
                config=config, env=env, model=model, optimizer=optimizer, start_update=start,
                policy=make_policy(config, env), threads=self.threads,
                metrics_path=Path(config.metrics_path), checkpoint_path=Path(config.checkpoint_path),
                on_event=self.log_event,
            )
            history = trainer.run()
        self.updates_completed = trainer.update - start
        self.episodes_processed = self.updates_completed * config.batch_size
        result = {"update": trainer.update, "parameters": model.parameters.count}
        if history:
            result["mean_reward"] = history[-1].mean_reward
        return result


def restore_model(checkpoint: Checkpoint, config: ExperimentConfig, split: str, data_dir: Optional[Path]):
    env = build_env(config, split, data_dir)
    model = build_model_for(config, env)
    checkpoint.restore(model)
    return env, model


def checkpoint_config(checkpoint: Checkpoint, paths: Optional[ExperimentConfig]) -> ExperimentConfig:
    """The checkpoint's config, with data and output paths from ``paths``."""
    if paths is None:
        return checkpoint.config
    if paths.digest() != checkpoint.digest:
        raise ConfigError("config file does not describe the checkpointed experiment (digest differs)")
    return paths


class EvalJob(BaseJob):
    def __init__(self, db: Session, checkpoint_path: Path, episodes: int, mode: Literal["greedy", "sample"],
                 out: Path, config: Optional[ExperimentConfig] = None, threads: Optional[int] = None,
                 data_dir: Optional[Path] = None):
        super().__init__(db, "eval")
        self.checkpoint = load_checkpoint(checkpoint_path)
        self.config = checkpoint_config(self.checkpoint, config)
        self.episodes = episodes
        self.mode = mode
        self.out = out
        self.threads = threads or self.config.threads or get_settings().threads
        self.data_dir = data_dir

    def describe(self) -> dict:
        return {"task": self.config.task, "config_digest": self.checkpoint.digest, "seed": self.config.seed}

    def run_job(self) -> dict:
        with precision(self.config.precision):
            env, model = restore_model(self.checkpoint, self.config, "test", self.data_dir)
            report = evaluate(model, env, self.config, self.episodes, self.mode, threads=self.threads)
        write_report_csv(report, self.out)
        self.episodes_processed = self.episodes
        self.log_event("evaluation_completed", {"mean_reward": report.mean_reward, "out": str(self.out)})
        return report.model_dump()


class TraceJob(BaseJob):
    """Greedy held-out episodes written as trace files.

    Episodes run one at a time so the recorded beliefs can be regenerated
    exactly by replaying them at batch size 1.
    """

    def __init__(self, db: Session, checkpoint_path: Path, episodes: int, out: Path,
                 config: Optional[ExperimentConfig] = None, data_dir: Optional[Path] = None):
        super().__init__(db, "trace")
        self.checkpoint = load_checkpoint(checkpoint_path)
        self.config = checkpoint_config(self.checkpoint, config)
        self.episodes = episodes
        self.out = out
        self.data_dir = data_dir

    def describe(self) -> dict:
        return {"task": self.config.task, "config_digest": self.checkpoint.digest, "seed": self.config.seed}

    def run_job(self) -> dict:
        if self.episodes < 1:
            raise ConfigError(f"need at least one episode, got {self.episodes}")
        config = self.config.updated(rollout_chunk=1)
        with precision(config.precision):
            env, model = restore_model(self.checkpoint, config, "test", self.data_dir)
            rngs = [streams.evaluation_rng(config.seed, e) for e in range(self.episodes)]
            traces = run_episodes(env, model, config, rngs, greedy=True, keep_reconstructions=True)
        files = 0
        for trace in traces:
            files += len(emit_trace(trace, env, self.out))
        self.episodes_processed = len(traces)
        return {"episodes": len(traces), "files": files, "out": str(self.out)}


GEN_PRESETS = {"blockworld": "blockworld64", "cluttered": "cluttered104"}


class GenJob(BaseJob):
    """Write generated examples as PGM images plus a JSON-lines index."""

    def __init__(self, db: Session, task: str, count: int, seed: int, out: Path, preset: Optional[str] = None,
                 data_dir: Optional[Path] = None):
        super().__init__(db, "gen")
        if task not in GEN_PRESETS:
            raise ConfigError(f"unknown generator task '{task}', expected one of {sorted(GEN_PRESETS)}")
        preset = preset or GEN_PRESETS[task]
        if preset not in PRESETS or PRESETS[preset]["world"] != task:
            raise ConfigError(f"preset '{preset}' is not a {task} geometry")
        if count < 1:
            raise ConfigError(f"count must be positive, got {count}")
        self.task = task
        self.config = ExperimentConfig.from_mapping({"task": preset, "seed": seed})
        self.count = count
        self.seed = seed
        self.out = out
        self.data_dir = data_dir

    def describe(self) -> dict:
        return {"task": self.config.task, "seed": self.seed}

    def run_job(self) -> dict:
        env = build_env(self.config, "train", self.data_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        index = []
        for i in range(self.count):
            example = env.sample(streams.stream(self.seed, streams.GENERATION, i))
            name = f"{self.task}{i:05d}.pgm"
            write_pgm(self.out / name, example.x)
            record = {"file": name, "label": example.y}
            if self.task == "blockworld":
                record.update(example.meta["record"])
            else:
                record.update({k: example.meta[k] for k in ("digit_offset", "clutter")})
            index.append(record)
        write_jsonl(self.out / "index.jsonl", index)
        self.episodes_processed = self.count
        return {"count": self.count, "out": str(self.out)}


BASELINE_KINDS = ("random", "freq", "full")


class BaselineJob(ConfiguredJob):
    """Train the belief network under a baseline policy (or with full
    observation) and evaluate it on held-out data.

    Outputs go next to the configured metrics file as
    ``baseline-<kind>-metrics.csv``, ``baseline-<kind>.isk`` and
    ``baseline-<kind>-report.csv``.
    """

    def __init__(self, db: Session, kind: str, config: ExperimentConfig, **kwargs):
        if kind not in BASELINE_KINDS:
            raise ConfigError(f"unknown baseline '{kind}', expected one of {BASELINE_KINDS}")
        if kind == "full":
            config = baseline_full_observation(config)
        else:
            config = config.updated(policy=kind)
        super().__init__(db, "baseline", config, **kwargs)
        self.kind = kind

    def outputs(self) -> dict[str, Path]:
        base = Path(self.config.metrics_path)
        return {
            "metrics": base.with_name(f"baseline-{self.kind}-metrics.csv"),
            "checkpoint": base.with_name(f"baseline-{self.kind}.isk"),
            "report": base.with_name(f"baseline-{self.kind}-report.csv"),
        }

    def run_job(self) -> dict:
        config = self.config
        paths = self.outputs()
        with precision(config.precision):
            env = build_env(config, "train", self.data_dir)
            policy = make_policy(config, env)
            model = build_model_for(config, env)
            trainer = Trainer(
                config=config, env=env, model=model, policy=policy, threads=self.threads,
                metrics_path=paths["metrics"], checkpoint_path=paths["checkpoint"], on_event=self.log_event,
            )
            trainer.run()
            test_env = build_env(config, "test", self.data_dir)
            if self.kind == "random":
                eval_policy, mode = RandomPolicy(), "sample"
            elif self.kind == "freq":
                eval_policy, mode = FrequencyPolicy(unigram_counts(env)), "sample"
            else:
                eval_policy, mode = None, "greedy"
            report = evaluate(model, test_env, config, config.eval_episodes, mode, eval_policy, self.threads)
        write_report_csv(report, paths["report"])
        self.updates_completed = trainer.update
        self.episodes_processed = trainer.update * config.batch_size + config.eval_episodes
        self.log_event("evaluation_completed", {"kind": self.kind, "mean_reward": report.mean_reward})
        return {"kind": self.kind, "report": str(paths["report"]), "mean_reward": report.mean_reward}


class SelftestJob(BaseJob):
    def __init__(self, db: Session):
        super().__init__(db, "selftest")

    def run_job(self) -> dict:
        results = run_selftest()
        print(format_table(results))
        failed = [r.name for r in results if not r.passed]
        if failed:
            raise SelftestFailure(failed)
        return {"checks": len(results)}

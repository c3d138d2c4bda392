"""Command-line entry point: ``python -m harness <command> ...``.

Failures print one line to stderr, ``error: <ErrorClass>: <message>``.
Exit status is 0 on success, 2 for usage and configuration errors (after
the usage text) and 1 for any other failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from database.connection import get_session
from harness.config import load_config
from harness.errors import ConfigError
from harness.jobs import (
    BASELINE_KINDS, GEN_PRESETS, BaseJob, BaselineJob, EvalJob, GenJob, SelftestJob, TraceJob, TrainJob,
)
from harness.settings import get_settings

logger = logging.getLogger(__name__)

USAGE_ERRORS = ("ConfigError",)


class CliParser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(2, f"error: UsageError: {message}\n")


def build_parser() -> CliParser:
    parser = CliParser(prog="infoseek", description="Train and evaluate information-seeking agents")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    train = commands.add_parser("train", help="train a belief network and policy")
    train.add_argument("--config", required=True, type=Path)
    train.add_argument("--resume", type=Path, help="checkpoint to continue from")
    train.add_argument("--threads", type=int, help="rollout worker threads")

    evaluate = commands.add_parser("eval", help="evaluate a checkpoint on held-out data")
    evaluate.add_argument("--ckpt", required=True, type=Path)
    evaluate.add_argument("--episodes", required=True, type=int)
    evaluate.add_argument("--mode", choices=("greedy", "sample"), default="greedy")
    evaluate.add_argument("--out", required=True, type=Path)
    evaluate.add_argument("--config", type=Path, help="config supplying data paths")
    evaluate.add_argument("--threads", type=int)

    trace = commands.add_parser("trace", help="write per-step trace files for held-out episodes")
    trace.add_argument("--ckpt", required=True, type=Path)
    trace.add_argument("--episodes", required=True, type=int)
    trace.add_argument("--out", required=True, type=Path)
    trace.add_argument("--config", type=Path, help="config supplying data paths")

    gen = commands.add_parser("gen", help="generate synthetic examples")
    gen.add_argument("--task", required=True, choices=sorted(GEN_PRESETS))
    gen.add_argument("--count", required=True, type=int)
    gen.add_argument("--seed", required=True, type=int)
    gen.add_argument("--out", required=True, type=Path)
    gen.add_argument("--preset", help="geometry preset (default: the full-size one)")

    baseline = commands.add_parser("baseline", help="train and evaluate a baseline")
    baseline.add_argument("--kind", required=True, choices=BASELINE_KINDS)
    baseline.add_argument("--config", required=True, type=Path)
    baseline.add_argument("--threads", type=int)

    commands.add_parser("selftest", help="gradient checks and estimator oracles")
    return parser


def make_job(args: argparse.Namespace, db) -> BaseJob:
    if args.command == "train":
        return TrainJob(db, load_config(args.config), resume=args.resume, threads=args.threads)
    if args.command == "eval":
        config = load_config(args.config) if args.config else None
        return EvalJob(db, args.ckpt, args.episodes, args.mode, args.out, config=config, threads=args.threads)
    if args.command == "trace":
        config = load_config(args.config) if args.config else None
        return TraceJob(db, args.ckpt, args.episodes, args.out, config=config)
    if args.command == "gen":
        return GenJob(db, args.task, args.count, args.seed, args.out, preset=args.preset)
    if args.command == "baseline":
        return BaselineJob(db, args.kind, load_config(args.config), threads=args.threads)
    return SelftestJob(db)


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def fail(parser: CliParser, error_type: str, message: str) -> int:
    if error_type in USAGE_ERRORS:
        parser.print_usage(sys.stderr)
    print(f"error: {error_type}: {' '.join(message.split())}", file=sys.stderr)
    return 2 if error_type in USAGE_ERRORS else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(get_settings().log_level)

    sessions = get_session()
    db = next(sessions)
    try:
        try:
            job = make_job(args, db)
        except (ConfigError, ValueError, OSError) as e:
            return fail(parser, type(e).__name__, str(e))
        result = job.execute(trigger="cli")
    finally:
        sessions.close()

    if not result["success"]:
        return fail(parser, result["error_type"], result["error"])
    print(json.dumps(result["result"], sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())

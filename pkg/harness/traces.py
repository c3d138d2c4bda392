"""Per-episode trace files: JSON lines plus PGM snapshots for image tasks.

Layout under the output directory::

    episode0003/trace.jsonl            one record per question
    episode0003/step000-revealed.pgm   answers received before the question
    episode0003/step000-recon.pgm      reconstruction f^x at that point
    episode0003/step000-policy.pgm     π painted into blocks, scaled to its max
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Union

import numpy as np

from beliefnet.encoding import block_origin, encode_image
from seekrl import EpisodeTrace
from worlds import Environment, write_jsonl, write_pgm

logger = logging.getLogger(__name__)

TOP_K = 5


def step_records(trace: EpisodeTrace, env: Environment, top_k: int = TOP_K) -> list[dict]:
    records = []
    for t, (q, answer) in enumerate(zip(trace.questions, trace.answers)):
        policy = trace.policies[t]
        order = np.argsort(-policy, kind="stable")[:top_k]
        record = {
            "episode": trace.episode_index,
            "step": t,
            "question": int(q),
            "question_label": env.question_label(int(q)),
            "answer": [float(v) for v in answer],
            "log_prob": float(trace.log_probs[t]),
            "value": float(trace.values[t]),
            "policy": [float(p) for p in policy],
            "policy_top": [[int(i), float(policy[i])] for i in order],
            "extrinsic": float(trace.extrinsic[t]),
            "intrinsic": float(trace.intrinsic[t]),
            "intrinsic_level": float(trace.intrinsic_levels[t]),
            "label": trace.label,
        }
        if trace.label_probs is not None:
            record["label_probs"] = [float(p) for p in trace.label_probs[t]]
        if "record" in trace.notes:
            record["scene"] = trace.notes["record"]
        records.append(record)
    return records


def revealed_canvas(trace: EpisodeTrace, env: Environment, steps: int) -> np.ndarray:
    stack = encode_image(trace.history.prefix(steps), env.space.image_shape, env.space.block_size)
    return stack.observation[:-1]


def policy_heatmap(policy: np.ndarray, env: Environment) -> np.ndarray:
    _, H, W = env.space.image_shape
    b = env.space.block_size
    canvas = np.zeros((H, W))
    peak = float(np.max(policy)) if policy.size else 0.0
    if peak <= 0.0:
        return canvas
    for q, p in enumerate(policy):
        r, c = block_origin(q, env.space.image_shape, b)
        canvas[r:r + b, c:c + b] = p / peak
    return canvas


def emit_trace(trace: EpisodeTrace, env: Environment, out_dir: Union[str, Path], top_k: int = TOP_K) -> list[Path]:
    """Write one episode's files and return their paths.

    Images need ``trace.reconstructions`` (a rollout with reconstructions
    kept) and an image question space.
    """
    directory = Path(out_dir) / f"episode{trace.episode_index:04d}"
    directory.mkdir(parents=True, exist_ok=True)
    written = [directory / "trace.jsonl"]
    write_jsonl(written[0], step_records(trace, env, top_k))

    if env.space.image_shape is None or trace.reconstructions is None:
        return written
    for t in range(len(trace)):
        images = {
            "revealed": revealed_canvas(trace, env, t),
            "recon": np.clip(trace.reconstructions[t], 0.0, 1.0),
            "policy": policy_heatmap(trace.policies[t], env),
        }
        for kind, image in images.items():
            path = directory / f"step{t:03d}-{kind}.pgm"
            write_pgm(path, image)
            written.append(path)
    logger.debug("wrote %d files for episode %d", len(written), trace.episode_index)
    return written

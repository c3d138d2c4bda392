"""Input encodings for the two architectures.

FC layout, for Q questions of arity a:
    [answer table, question-major, Q*a values | asked mask, Q values]

Image layout: C masked image channels followed by one visibility channel.
Block q covers rows (q // nw)*b .. +b and columns (q % nw)*b .. +b, and its
answer is the block's pixels channel-major then row-major.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from beliefnet.history import TrialHistory
from beliefnet.outputs import Conditioning
from numerics.errors import ShapeError

STATEMENT_FACTOR = 4


def encode_fc(history: TrialHistory, feature_count: int) -> np.ndarray:
    if history.question_count != feature_count:
        raise ShapeError(f"history covers {history.question_count} questions, encoder expects {feature_count}")
    return np.concatenate([history.table().reshape(-1), history.asked.astype(np.float64)])


def encode_fc_batch(histories: Sequence[TrialHistory]) -> np.ndarray:
    return np.stack([encode_fc(h, h.question_count) for h in histories])


def check_blocks(image_shape: Sequence[int], block_size: int) -> tuple[int, int]:
    """Return the (rows, cols) block grid or raise on misalignment."""
    _, H, W = image_shape
    if block_size < 1 or H % block_size or W % block_size:
        raise ShapeError(f"block size {block_size} does not divide image extents {H}x{W}")
    return H // block_size, W // block_size


def block_origin(question: int, image_shape: Sequence[int], block_size: int) -> tuple[int, int]:
    _, nw = check_blocks(image_shape, block_size)
    row, col = divmod(int(question), nw)
    return row * block_size, col * block_size


@dataclass
class ChannelStack:
    """One example's convolutional input."""

    observation: np.ndarray
    summary: Optional[np.ndarray] = None
    statement: Optional[np.ndarray] = None


def statement_map(statement: np.ndarray, height: int, width: int) -> np.ndarray:
    """Repeat each statement bit over an (height, width) plane."""
    statement = np.asarray(statement, dtype=np.float64).reshape(-1)
    return np.broadcast_to(statement[:, None, None], (statement.size, height, width)).copy()


def encode_image(
    history: TrialHistory,
    image_shape: Sequence[int],
    block_size: int,
    conditioning: Optional[Conditioning] = None,
) -> ChannelStack:
    C, H, W = image_shape
    nh, nw = check_blocks(image_shape, block_size)
    if history.question_count != nh * nw:
        raise ShapeError(f"history covers {history.question_count} questions, image has {nh * nw} blocks")
    if history.arity != C * block_size * block_size:
        raise ShapeError(f"answer arity {history.arity} does not match {C}x{block_size}x{block_size} blocks")

    obs = np.zeros((C + 1, H, W))
    for q, answer in zip(history.questions, history.answers):
        r, c = block_origin(q, image_shape, block_size)
        obs[:C, r:r + block_size, c:c + block_size] = answer.reshape(C, block_size, block_size)
        obs[C, r:r + block_size, c:c + block_size] = 1.0

    stack = ChannelStack(observation=obs)
    if conditioning is not None:
        if conditioning.summary is not None:
            s = conditioning.summary
            if s.ndim != 3 or H % s.shape[1] or W % s.shape[2] or H // s.shape[1] != W // s.shape[2]:
                raise ShapeError(f"summary shape {s.shape} is not a uniform downsampling of {H}x{W}")
            stack.summary = s
        if conditioning.statement is not None:
            if H % STATEMENT_FACTOR or W % STATEMENT_FACTOR:
                raise ShapeError(f"statement map needs extents divisible by {STATEMENT_FACTOR}, got {H}x{W}")
            stack.statement = statement_map(conditioning.statement, H // STATEMENT_FACTOR, W // STATEMENT_FACTOR)
    return stack

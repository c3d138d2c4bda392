"""Digit classification on a (possibly cluttered) canvas."""
from __future__ import annotations

import logging
from dataclasses import replace
from typing import Optional

import numpy as np

from beliefnet.factory import ModelGeometry
from beliefnet.outputs import Conditioning
from numerics.errors import ShapeError
from worlds.base import Environment, Example, QuestionSpace
from worlds.errors import PlacementError
from worlds.pixels import observe_pixels

logger = logging.getLogger(__name__)

MAX_CLUTTER_TRIES = 1000


def _overlaps(r0: int, c0: int, h0: int, w0: int, r1: int, c1: int, h1: int, w1: int) -> bool:
    return r0 < r1 + h1 and r1 < r0 + h0 and c0 < c1 + w1 and c1 < c0 + w0


def gen_cluttered(
    digit: np.ndarray,
    canvas_size: int,
    clutter_count: int,
    patch_size: int,
    donors: np.ndarray,
    rng: np.random.Generator,
    label: Optional[int] = None,
) -> Example:
    """Place ``digit`` uniformly on a blank canvas, then add clutter patches.

    Each patch is cropped from a random position of a random donor digit and
    composed by pixel-wise maximum. Patch positions that intersect the
    digit's bounding box are rejected, so digit pixels are never modified.
    """
    digit = np.asarray(digit, dtype=np.float64)
    dh, dw = digit.shape
    if dh > canvas_size or dw > canvas_size:
        raise ShapeError(f"digit {dh}x{dw} does not fit a {canvas_size}x{canvas_size} canvas")
    canvas = np.zeros((canvas_size, canvas_size))
    row = int(rng.integers(0, canvas_size - dh + 1))
    col = int(rng.integers(0, canvas_size - dw + 1))
    canvas[row:row + dh, col:col + dw] = digit

    placed = []
    for _ in range(clutter_count):
        donor = donors[int(rng.integers(0, len(donors)))]
        sr = int(rng.integers(0, donor.shape[0] - patch_size + 1))
        sc = int(rng.integers(0, donor.shape[1] - patch_size + 1))
        patch = np.asarray(donor[sr:sr + patch_size, sc:sc + patch_size], dtype=np.float64)
        for attempt in range(MAX_CLUTTER_TRIES):
            pr = int(rng.integers(0, canvas_size - patch_size + 1))
            pc = int(rng.integers(0, canvas_size - patch_size + 1))
            if not _overlaps(pr, pc, patch_size, patch_size, row, col, dh, dw):
                break
            logger.debug("clutter patch at (%d, %d) overlaps the digit; retry %d", pr, pc, attempt + 1)
        else:
            raise PlacementError(
                f"no clutter position outside the digit after {MAX_CLUTTER_TRIES} tries "
                f"(canvas {canvas_size}, patch {patch_size})"
            )
        region = canvas[pr:pr + patch_size, pc:pc + patch_size]
        np.maximum(region, patch, out=region)
        placed.append((pr, pc))

    meta = {"digit_offset": (row, col), "clutter": placed, "clutter_overlaps_digit": False}
    return Example(x=canvas[None], y=label, meta=meta)


def summary_channel(canvas: np.ndarray, factor: int = 8) -> np.ndarray:
    """Average-pool over factor×factor tiles; keeps a leading channel axis."""
    canvas = np.asarray(canvas, dtype=np.float64)
    squeeze = canvas.ndim == 2
    if squeeze:
        canvas = canvas[None]
    C, H, W = canvas.shape
    if H % factor or W % factor:
        raise ShapeError(f"canvas {H}x{W} is not divisible by summary factor {factor}")
    pooled = canvas.reshape(C, H // factor, factor, W // factor, factor).mean(axis=(2, 4))
    return pooled[0] if squeeze else pooled


class ClutteredDigitsEnv(Environment):
    """Classify a digit from peeks at pixel blocks of its canvas.

    ``clutter_count=0`` with ``canvas_size`` equal to the digit size is plain
    masked MNIST.
    """

    name = "cluttered"
    reward_kind = "label"
    x_model = "bernoulli"

    def __init__(
        self,
        images: np.ndarray,
        labels: np.ndarray,
        canvas_size: int = 104,
        clutter_count: int = 8,
        patch_size: int = 8,
        block_size: int = 4,
        summary_factor: Optional[int] = 8,
        label_count: int = 10,
    ):
        self.images = np.asarray(images, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        if len(self.images) != len(self.labels) or len(self.images) == 0:
            raise ValueError(f"need matching non-empty images/labels, got {len(self.images)} and {len(self.labels)}")
        self.canvas_size = canvas_size
        self.clutter_count = clutter_count
        self.patch_size = patch_size
        self.block_size = block_size
        self.summary_factor = summary_factor
        self.label_count = label_count
        if summary_factor and canvas_size % summary_factor:
            raise ShapeError(f"canvas {canvas_size} is not divisible by summary factor {summary_factor}")
        blocks = (canvas_size // block_size) ** 2
        if canvas_size % block_size:
            raise ShapeError(f"block size {block_size} does not divide canvas {canvas_size}")
        self.space = QuestionSpace(blocks, block_size * block_size, (1, canvas_size, canvas_size), block_size)

    @property
    def x_shape(self) -> tuple[int, ...]:
        return (1, self.canvas_size, self.canvas_size)

    def sample(self, rng: np.random.Generator) -> Example:
        idx = int(rng.integers(0, len(self.images)))
        return gen_cluttered(
            self.images[idx], self.canvas_size, self.clutter_count, self.patch_size,
            self.images, rng, label=int(self.labels[idx]),
        )

    def observe(self, x: np.ndarray, question: int) -> np.ndarray:
        return observe_pixels(x, question, self.block_size)

    def conditioning(self, example: Example) -> Optional[Conditioning]:
        if not self.summary_factor:
            return None
        return Conditioning(summary=summary_channel(example.x, self.summary_factor))

    def geometry(self) -> ModelGeometry:
        base = super().geometry()
        if not self.summary_factor:
            return base
        return replace(base, summary_channels=1, summary_factor=self.summary_factor)

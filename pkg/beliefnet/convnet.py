"""Convolutional bottom-up/top-down belief network with an LSTM bottleneck.

Bottom-up: a stride-1 stem, then one stride-2 convolution per level. The
deepest map feeds an LSTM whose state carries V and f^y. Top-down: a dense
layer from the LSTM state back to the deepest map, then one transposed
convolution per level that also receives its bottom-up partner. A final
stride-1 convolution yields the reconstruction channels plus one
policy-logit channel at input resolution.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from beliefnet.base import BeliefModel
from beliefnet.encoding import STATEMENT_FACTOR, ChannelStack, check_blocks, encode_image
from beliefnet.history import TrialHistory
from beliefnet.outputs import STATEMENT_DIM, BeliefOutputs, Conditioning
from numerics import ops
from numerics.errors import ShapeError
from numerics.init import orthogonal_init, orthogonal_kernel
from numerics.tensor import Tensor

logger = logging.getLogger(__name__)

MIN_EXTENT = 4


def auto_depth(height: int, width: int) -> int:
    """Number of halvings while both extents stay even and reach at least 4."""
    depth = 0
    while height % 2 == 0 and width % 2 == 0 and min(height, width) // 2 >= MIN_EXTENT:
        height, width, depth = height // 2, width // 2, depth + 1
    return depth


def _level_of(factor: int, name: str) -> int:
    level = int(round(math.log2(factor))) if factor > 0 else -1
    if level < 1 or 2 ** level != factor:
        raise ValueError(f"{name} factor must be a power of two >= 2, got {factor}")
    return level


@dataclass
class ConvNetConfig:
    image_shape: tuple[int, int, int]
    block_size: int
    label_count: int = 0
    depth: Optional[int] = None
    base_channels: int = 16
    max_channels: int = 128
    lstm_width: int = 256
    kernel: int = 3
    summary_channels: int = 0
    summary_factor: int = 8
    statement_dim: int = 0
    x_model: str = "bernoulli"
    slope: float = ops.DEFAULT_SLOPE
    ln_eps: float = ops.DEFAULT_LN_EPS
    head_init: str = "orthogonal"
    init_gain: float = 1.0


@dataclass
class LSTMState:
    h: Tensor
    c: Tensor


class ConvBeliefNet(BeliefModel):
    architecture = "conv"

    def __init__(self, config: ConvNetConfig, rng: np.random.Generator):
        super().__init__()
        C, H, W = config.image_shape
        if config.x_model not in ("bernoulli", "gaussian"):
            raise ValueError(f"unknown x_model '{config.x_model}'")
        if config.head_init not in ("orthogonal", "zeros"):
            raise ValueError(f"unknown head_init '{config.head_init}'")
        self.block_grid = check_blocks(config.image_shape, config.block_size)
        depth = auto_depth(H, W) if config.depth is None else config.depth
        if depth < 1 or H % (2 ** depth) or W % (2 ** depth):
            raise ShapeError(f"image extents {H}x{W} are not divisible by 2^{depth}")
        self.config = config
        self.depth = depth

        self.extents = [(H // 2 ** l, W // 2 ** l) for l in range(depth + 1)]
        self.channels = [min(config.base_channels * 2 ** l, config.max_channels) for l in range(depth + 1)]
        self.extras = [0] * (depth + 1)
        self.summary_level = None
        self.statement_level = None
        if config.summary_channels:
            self.summary_level = _level_of(config.summary_factor, "summary")
            self.extras[self._check_level(self.summary_level, "summary")] += config.summary_channels
        if config.statement_dim not in (0, STATEMENT_DIM):
            raise ValueError(f"statement vectors have {STATEMENT_DIM} entries, got {config.statement_dim}")
        if config.statement_dim:
            self.statement_level = _level_of(STATEMENT_FACTOR, "statement")
            self.extras[self._check_level(self.statement_level, "statement")] += config.statement_dim
        aug = [c + e for c, e in zip(self.channels, self.extras)]

        k = config.kernel
        gain = config.init_gain
        add = self.parameters.add

        def norm(prefix, size):
            add(f"{prefix}.gain", np.ones(size))
            add(f"{prefix}.bias", np.zeros(size))

        def size_at(level):
            h, w = self.extents[level]
            return self.channels[level] * h * w

        add("stem.K", orthogonal_kernel(self.channels[0], C + 1, k, rng, gain))
        add("stem.b", np.zeros(self.channels[0]))
        norm("stem", size_at(0))
        for l in range(1, depth + 1):
            add(f"down{l}.K", orthogonal_kernel(self.channels[l], aug[l - 1], k, rng, gain))
            add(f"down{l}.b", np.zeros(self.channels[l]))
            norm(f"down{l}", size_at(l))

        m = config.lstm_width
        bh, bw = self.extents[depth]
        lstm_in = aug[depth] * bh * bw
        add("lstm.W", np.concatenate([orthogonal_init(m, lstm_in, rng) for _ in range(4)]))
        add("lstm.U", np.concatenate([orthogonal_init(m, m, rng) for _ in range(4)]))
        forget_open = np.zeros(4 * m)
        forget_open[m:2 * m] = 1.0
        add("lstm.b", forget_open)

        add("top.W", orthogonal_init(size_at(depth), m, rng, gain))
        add("top.b", np.zeros(size_at(depth)))
        norm("top", size_at(depth))
        for l in range(depth, 0, -1):
            add(f"up{l}.K", orthogonal_kernel(self.channels[l] + aug[l], self.channels[l - 1], k, rng, gain))
            add(f"up{l}.b", np.zeros(self.channels[l - 1]))
            norm(f"up{l}", size_at(l - 1))

        out_channels = C + 1
        if config.head_init == "zeros":
            add("out.K", np.zeros((out_channels, self.channels[0] + aug[0], k, k)))
        else:
            add("out.K", orthogonal_kernel(out_channels, self.channels[0] + aug[0], k, rng))
        add("out.b", np.zeros(out_channels))

        heads = {"value": 1}
        if config.label_count:
            heads["label"] = config.label_count
        for head, size in heads.items():
            W_head = np.zeros((size, m)) if config.head_init == "zeros" else orthogonal_init(size, m, rng)
            add(f"head.{head}.W", W_head)
            add(f"head.{head}.b", np.zeros(size))
        logger.debug(
            "built conv belief net: depth %d, bottleneck %dx%d, %d parameters",
            depth, bh, bw, self.parameters.count,
        )

    def _check_level(self, level: int, name: str) -> int:
        if level > self.depth:
            raise ShapeError(f"{name} level {level} is deeper than network depth {self.depth}")
        return level

    def initial_state(self, batch: int) -> LSTMState:
        m = self.config.lstm_width
        return LSTMState(ops.constant(np.zeros((batch, m))), ops.constant(np.zeros((batch, m))))

    def _norm_act(self, x: Tensor, prefix: str) -> Tensor:
        shape = x.shape
        flat = ops.reshape(x, (shape[0], int(np.prod(shape[1:]))))
        flat = ops.layer_norm(flat, self.p(f"{prefix}.gain"), self.p(f"{prefix}.bias"), self.config.ln_eps)
        return ops.reshape(ops.leaky_relu(flat, self.config.slope), shape)

    def _with_extras(self, x: Tensor, level: int, summary, statement) -> Tensor:
        parts = [x]
        if level == self.summary_level:
            if summary is None:
                raise ShapeError("network expects a summary channel but none was supplied")
            parts.append(ops.constant(summary))
        if level == self.statement_level:
            if statement is None:
                raise ShapeError("network expects a statement map but none was supplied")
            parts.append(ops.constant(statement))
        return ops.concat(parts, axis=1) if len(parts) > 1 else x

    def forward(
        self,
        observation: np.ndarray,
        state: LSTMState,
        asked: np.ndarray,
        summary: Optional[np.ndarray] = None,
        statement: Optional[np.ndarray] = None,
        allow_exhausted: bool = False,
    ) -> tuple[BeliefOutputs, LSTMState, Tensor]:
        """Batched forward pass; returns outputs, the next LSTM state and the
        policy-logit channel."""
        cfg = self.config
        C, H, W = cfg.image_shape
        x = ops.constant(observation)
        if x.shape[1:] != (C + 1, H, W):
            raise ShapeError(f"observation has shape {x.shape[1:]}, expected {(C + 1, H, W)}")
        B = x.shape[0]

        e = self._norm_act(ops.conv2d(x, self.p("stem.K"), self.p("stem.b")), "stem")
        skips = [self._with_extras(e, 0, summary, statement)]
        for l in range(1, self.depth + 1):
            e = ops.conv2d_down(skips[-1], self.p(f"down{l}.K"), self.p(f"down{l}.b"))
            e = self._norm_act(e, f"down{l}")
            skips.append(self._with_extras(e, l, summary, statement))

        bottleneck = skips[-1]
        flat = ops.reshape(bottleneck, (B, int(np.prod(bottleneck.shape[1:]))))
        lstm = {"W": self.p("lstm.W"), "U": self.p("lstm.U"), "b": self.p("lstm.b")}
        h, c = ops.lstm_step(flat, state.h, state.c, lstm)

        bh, bw = self.extents[self.depth]
        d = ops.dense(h, self.p("top.W"), self.p("top.b"))
        d = self._norm_act(ops.reshape(d, (B, self.channels[self.depth], bh, bw)), "top")
        for l in range(self.depth, 0, -1):
            d = ops.conv2d_up(ops.concat([d, skips[l]], axis=1), self.p(f"up{l}.K"), self.p(f"up{l}.b"))
            d = self._norm_act(d, f"up{l}")
        out = ops.conv2d(ops.concat([d, skips[0]], axis=1), self.p("out.K"), self.p("out.b"))

        recon, pixel_logits = ops.split(out, [C, 1], axis=1)
        if cfg.x_model == "bernoulli":
            recon = ops.sigmoid(recon)
        pixel_logits = ops.reshape(pixel_logits, (B, H, W))

        logits = ops.block_sum(pixel_logits, cfg.block_size)
        allowed = self.allowed_mask(asked, allow_exhausted)
        value = ops.reshape(ops.dense(h, self.p("head.value.W"), self.p("head.value.b")), (B,))
        labels = None
        if cfg.label_count:
            labels = ops.softmax(ops.dense(h, self.p("head.label.W"), self.p("head.label.b")))
        outputs = BeliefOutputs(
            reconstruction=recon,
            labels=labels,
            value=value,
            policy=ops.softmax_masked(logits, allowed),
            log_policy=ops.log_softmax_masked(logits, allowed),
            pixel_logits=pixel_logits,
        )
        return outputs, LSTMState(h, c), pixel_logits

    def encode(
        self,
        histories: Sequence[TrialHistory],
        conditionings: Optional[Sequence[Optional[Conditioning]]] = None,
    ) -> list[ChannelStack]:
        conds = conditionings if conditionings is not None else [None] * len(histories)
        return [
            encode_image(h, self.config.image_shape, self.config.block_size, cond)
            for h, cond in zip(histories, conds)
        ]

    def step(
        self,
        histories: Sequence[TrialHistory],
        state: Any,
        conditionings: Optional[Sequence[Optional[Conditioning]]] = None,
        observed: Optional[Sequence[TrialHistory]] = None,
        allow_exhausted: bool = False,
    ) -> tuple[BeliefOutputs, Any]:
        stacks = self.encode(observed if observed is not None else histories, conditionings)
        observation = np.stack([s.observation for s in stacks])
        summary = np.stack([s.summary for s in stacks]) if stacks[0].summary is not None else None
        statement = np.stack([s.statement for s in stacks]) if stacks[0].statement is not None else None
        if self.summary_level is None:
            summary = None
        if self.statement_level is None:
            statement = None
        outputs, state, _ = self.forward(
            observation, state, self.asked_mask(histories), summary, statement, allow_exhausted
        )
        return outputs, state


def block_policy(pixel_logits, asked_blocks, block_size: int) -> Tensor:
    """Block probabilities from a (B, H, W) logit channel: per-block sums,
    then a softmax restricted to unasked blocks."""
    logits = ops.block_sum(pixel_logits, block_size)
    return ops.softmax_masked(logits, ~np.asarray(asked_blocks, dtype=bool))

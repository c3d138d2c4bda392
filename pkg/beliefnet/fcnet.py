"""Permutation-invariant fully-connected belief network."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from beliefnet.base import BeliefModel
from beliefnet.encoding import encode_fc_batch
from beliefnet.history import TrialHistory
from beliefnet.outputs import BeliefOutputs, Conditioning
from numerics import ops
from numerics.errors import ShapeError
from numerics.init import orthogonal_init
from numerics.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class FCNetConfig:
    question_count: int
    arity: int
    x_shape: tuple[int, ...]
    label_count: int = 0
    hidden: int = 512
    layers: int = 4
    x_model: str = "bernoulli"
    slope: float = ops.DEFAULT_SLOPE
    ln_eps: float = ops.DEFAULT_LN_EPS
    head_init: str = "orthogonal"
    init_gain: float = 1.0

    @property
    def input_width(self) -> int:
        return self.question_count * self.arity + self.question_count

    @property
    def x_size(self) -> int:
        return int(np.prod(self.x_shape))


class FCBeliefNet(BeliefModel):
    """Shared hidden stack (dense, layer norm, leaky ReLU, additive shortcut)
    followed by four linear heads for f^x, f^y, V and π."""

    architecture = "fc"

    def __init__(self, config: FCNetConfig, rng: np.random.Generator):
        super().__init__()
        if config.x_model not in ("bernoulli", "gaussian"):
            raise ValueError(f"unknown x_model '{config.x_model}'")
        if config.head_init not in ("orthogonal", "zeros"):
            raise ValueError(f"unknown head_init '{config.head_init}'")
        self.config = config
        gain = config.init_gain
        width = config.input_width
        for layer in range(config.layers):
            self.parameters.add(f"hidden{layer}.W", orthogonal_init(config.hidden, width, rng, gain))
            self.parameters.add(f"hidden{layer}.b", np.zeros(config.hidden))
            self.parameters.add(f"hidden{layer}.gain", np.ones(config.hidden))
            self.parameters.add(f"hidden{layer}.bias", np.zeros(config.hidden))
            if width != config.hidden:
                self.parameters.add(f"hidden{layer}.proj", orthogonal_init(config.hidden, width, rng))
            width = config.hidden

        heads = {"x": config.x_size, "value": 1, "policy": config.question_count}
        if config.label_count:
            heads["label"] = config.label_count
        for head, size in heads.items():
            if config.head_init == "zeros":
                W = np.zeros((size, config.hidden))
            else:
                W = orthogonal_init(size, config.hidden, rng)
            self.parameters.add(f"head.{head}.W", W)
            self.parameters.add(f"head.{head}.b", np.zeros(size))
        logger.debug("built fc belief net with %d parameters", self.parameters.count)

    def forward(self, encoded, asked, allow_exhausted: bool = False) -> BeliefOutputs:
        cfg = self.config
        h = encoded if isinstance(encoded, Tensor) else ops.constant(encoded)
        if h.values.ndim != 2 or h.shape[1] != cfg.input_width:
            raise ShapeError(f"fc input has shape {h.shape}, expected (batch, {cfg.input_width})")
        B = h.shape[0]
        for layer in range(cfg.layers):
            z = ops.dense(h, self.p(f"hidden{layer}.W"), self.p(f"hidden{layer}.b"))
            z = ops.layer_norm(z, self.p(f"hidden{layer}.gain"), self.p(f"hidden{layer}.bias"), cfg.ln_eps)
            z = ops.leaky_relu(z, cfg.slope)
            shortcut = ops.dense(h, self.p(f"hidden{layer}.proj")) if f"hidden{layer}.proj" in self.parameters else h
            h = ops.add(z, shortcut)

        def head(name):
            return ops.dense(h, self.p(f"head.{name}.W"), self.p(f"head.{name}.b"))

        recon = head("x")
        if cfg.x_model == "bernoulli":
            recon = ops.sigmoid(recon)
        recon = ops.reshape(recon, (B,) + tuple(cfg.x_shape))
        labels = ops.softmax(head("label")) if cfg.label_count else None
        value = ops.reshape(head("value"), (B,))
        allowed = self.allowed_mask(asked, allow_exhausted)
        logits = head("policy")
        return BeliefOutputs(
            reconstruction=recon,
            labels=labels,
            value=value,
            policy=ops.softmax_masked(logits, allowed),
            log_policy=ops.log_softmax_masked(logits, allowed),
        )

    def step(
        self,
        histories: Sequence[TrialHistory],
        state: Any,
        conditionings: Optional[Sequence[Optional[Conditioning]]] = None,
        observed: Optional[Sequence[TrialHistory]] = None,
        allow_exhausted: bool = False,
    ) -> tuple[BeliefOutputs, Any]:
        encoded = encode_fc_batch(observed if observed is not None else histories)
        return self.forward(encoded, self.asked_mask(histories), allow_exhausted), state

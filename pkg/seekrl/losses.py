"""Differentiable training losses.

Each loss takes recorded tensors plus constant arrays of matching shape.
``mask`` zeroes steps after an early termination; it defaults to all ones.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from numerics import ops
from numerics.errors import ShapeError
from numerics.tensor import Tensor


def _mask_for(t: Tensor, mask) -> Tensor:
    if mask is None:
        return ops.constant(np.ones(t.shape))
    m = np.asarray(mask, dtype=np.float64)
    if m.shape != t.shape:
        raise ShapeError(f"mask shape {m.shape} does not match {t.shape}")
    return ops.constant(m)


def td_lambda_loss(values: Tensor, targets, mask=None) -> Tensor:
    """Σ (V - target)^2; targets are constants, so only V carries gradient."""
    target = ops.constant(np.asarray(targets, dtype=np.float64))
    diff = ops.sub(values, target)
    return ops.sum_(ops.mul(ops.mul(diff, diff), _mask_for(values, mask)))


def policy_loss(
    log_probs: Tensor,
    advantages,
    entropies: Optional[Tensor] = None,
    entropy_coef: float = 0.0,
    mask=None,
) -> Tensor:
    """-Σ log π(q_t) A_t - entropy_coef * Σ H(π_t); advantages are constants."""
    m = _mask_for(log_probs, mask)
    adv = ops.constant(np.asarray(advantages, dtype=np.float64))
    loss = ops.scale(ops.sum_(ops.mul(ops.mul(log_probs, adv), m)), -1.0)
    if entropies is not None and entropy_coef:
        bonus = ops.sum_(ops.mul(entropies, m))
        loss = ops.sub(loss, ops.scale(bonus, entropy_coef))
    return loss


def prediction_loss(step_rewards: Tensor, mask=None) -> Tensor:
    """-Σ_t R_t(f(h_{:t+1}), x, y) over the differentiable reward terms."""
    return ops.scale(ops.sum_(ops.mul(step_rewards, _mask_for(step_rewards, mask))), -1.0)

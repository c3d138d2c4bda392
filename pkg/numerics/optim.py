"""Adam optimizer."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from numerics.errors import NonFiniteError, ShapeError
from numerics.tensor import Tensor


@dataclass
class AdamState:
    """Per-parameter moments plus the shared step counter."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first: dict[str, np.ndarray] = field(default_factory=dict)
    second: dict[str, np.ndarray] = field(default_factory=dict)

    def ensure(self, params: Mapping[str, Tensor]) -> None:
        for name, p in params.items():
            if name not in self.first:
                self.first[name] = np.zeros_like(p.values)
                self.second[name] = np.zeros_like(p.values)
            elif self.first[name].shape != p.shape:
                raise ShapeError(f"Adam moments for '{name}' have shape {self.first[name].shape}, parameter has {p.shape}")


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray], state: AdamState) -> AdamState:
    """Apply one bias-corrected Adam update in sorted parameter-name order.

    The whole update is rejected when any gradient is non-finite.
    """
    state.ensure(params)
    for name in sorted(params):
        g = grads[name]
        if g.shape != params[name].shape:
            raise ShapeError(f"gradient for '{name}' has shape {g.shape}, parameter has {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(name, f"non-finite gradient for parameter '{name}'; update rejected")

    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for name in sorted(params):
        g = grads[name]
        m = state.beta1 * state.first[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.second[name] + (1.0 - state.beta2) * g * g
        state.first[name], state.second[name] = m, v
        p = params[name]
        p.values = (p.values - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.values.dtype)
    return state

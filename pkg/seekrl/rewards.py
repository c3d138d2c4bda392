"""Extrinsic and intrinsic reward terms."""
from __future__ import annotations

import numpy as np

from numerics import ops
from numerics.errors import ShapeError
from numerics.tensor import Tensor

X_MODELS = ("bernoulli", "gaussian")


def extrinsic_label_reward(label_probs, label: int, floor: float) -> float:
    """log max(f^y[y], floor)."""
    probs = np.asarray(label_probs, dtype=np.float64).reshape(-1)
    if not 0 <= int(label) < probs.size:
        raise ValueError(f"label {label} outside [0, {probs.size})")
    return float(np.log(max(probs[int(label)], floor)))


def intrinsic_level(recon, x, x_model: str = "bernoulli", floor: float = 1e-6) -> float:
    """Log-likelihood of x under the reconstruction (the negative cross-entropy)."""
    recon = np.asarray(recon, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if recon.shape != x.shape:
        raise ShapeError(f"reconstruction {recon.shape} and observable {x.shape} differ")
    if x_model == "bernoulli":
        return float(np.sum(x * np.log(np.maximum(recon, floor)) + (1.0 - x) * np.log(np.maximum(1.0 - recon, floor))))
    if x_model == "gaussian":
        return float(-0.5 * np.sum((x - recon) ** 2))
    raise ValueError(f"unknown x_model '{x_model}', expected one of {X_MODELS}")


def per_question_intrinsic(levels, weight: float = 1.0) -> np.ndarray:
    """Reward for question t is weight * (level[t+1] - level[t])."""
    levels = np.asarray(levels, dtype=np.float64)
    if levels.ndim != 1 or levels.size < 1:
        raise ValueError(f"expected a 1-D sequence of levels, got shape {levels.shape}")
    return weight * np.diff(levels)


def label_log_likelihood(labels: Tensor, targets, floor: float) -> Tensor:
    """Differentiable per-example extrinsic term, shape (B,)."""
    return ops.categorical_log_likelihood(labels, targets, floor)


def reconstruction_log_likelihood(recon: Tensor, x, x_model: str, floor: float) -> Tensor:
    """Differentiable per-example intrinsic level, shape (B,)."""
    if x_model == "bernoulli":
        return ops.bernoulli_log_likelihood(recon, x, floor)
    if x_model == "gaussian":
        return ops.gaussian_log_likelihood(recon, x)
    raise ValueError(f"unknown x_model '{x_model}', expected one of {X_MODELS}")

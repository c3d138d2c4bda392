"""k-step returns and finite-horizon generalized advantage estimates.

Steps are 0-based: rewards[t] is received for question t and values[t] is
V(h_{:t}). The value after the final step is 0.
"""
from __future__ import annotations

from typing import Literal

import numpy as np

from seekrl.schemas import HyperParams
from seekrl.trace import EpisodeTrace

Adjustment = Literal["tail", "renormalize"]


def _with_terminal(rewards, values) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if v.shape == r.shape:
        v = np.append(v, 0.0)
    elif v.shape != (r.size + 1,):
        raise ValueError(f"{r.size} rewards need {r.size} or {r.size + 1} values, got {v.size}")
    return r, v


def k_step_return(rewards, values, gamma: float, t: int, k: int) -> float:
    """γ^k V(h_{:t+k}) + Σ_{u=t}^{t+k-1} γ^{u-t} R_u."""
    r, v = _with_terminal(rewards, values)
    T = r.size
    if not 0 <= t < T:
        raise ValueError(f"step {t} outside [0, {T})")
    if not 1 <= k <= T - t:
        raise ValueError(f"k={k} outside [1, {T - t}] at step {t}")
    discounts = gamma ** np.arange(k)
    return float(gamma ** k * v[t + k] + np.dot(discounts, r[t:t + k]))


def gae_weights(remaining: int, lam: float, adjustment: Adjustment = "tail") -> np.ndarray:
    """Weights over the k-step returns k = 1..remaining.

    ``tail``: (1-λ)λ^{k-1} for every k, plus λ^{remaining} added to the last
    entry, whose return is the full Monte Carlo return.
    ``renormalize``: (1-λ)λ^{k-1} divided by their sum 1-λ^{remaining}.
    """
    if remaining < 1:
        raise ValueError(f"remaining horizon must be >= 1, got {remaining}")
    w = (1.0 - lam) * lam ** np.arange(remaining)
    if adjustment == "tail":
        w[-1] += lam ** remaining
    elif adjustment == "renormalize":
        w = w / (1.0 - lam ** remaining)
    else:
        raise ValueError(f"unknown GAE adjustment '{adjustment}'")
    return w


def weighted_advantages(rewards, values, gamma: float, lam: float, adjustment: Adjustment = "tail") -> np.ndarray:
    """A_t = -V(h_{:t}) + weighted average of the k-step returns from t."""
    r, v = _with_terminal(rewards, values)
    T = r.size
    out = np.empty(T)
    for t in range(T):
        n = T - t
        returns = np.array([k_step_return(r, v, gamma, t, k) for k in range(1, n + 1)])
        out[t] = np.dot(gae_weights(n, lam, adjustment), returns) - v[t]
    return out


def delta_sum_advantages(rewards, values, gamma: float, lam: float) -> np.ndarray:
    """Σ_k (γλ)^k δ_{t+k} with δ_u = R_u + γV(h_{:u+1}) - V(h_{:u})."""
    r, v = _with_terminal(rewards, values)
    deltas = r + gamma * v[1:] - v[:-1]
    out = np.empty_like(deltas)
    acc = 0.0
    for t in range(deltas.size - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        out[t] = acc
    return out


def gae_advantages(trace: EpisodeTrace, hp: HyperParams) -> np.ndarray:
    return weighted_advantages(trace.rewards, trace.values, hp.gamma, hp.lam, hp.gae_adjustment)


def lambda_targets(trace: EpisodeTrace, hp: HyperParams) -> np.ndarray:
    """TD(λ) regression targets V(h_{:t}) + A_t."""
    return trace.values + gae_advantages(trace, hp)

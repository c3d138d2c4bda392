"""Central finite-difference verification of recorded gradients."""
from __future__ import annotations

from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from numerics.tensor import ComputationRecord, Tensor, precision

DEFAULT_STEP = 1e-5


def analytic_gradients(fn: Callable[[], Tensor], params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    for p in params.values():
        p.zero_grad()
    with ComputationRecord() as record:
        loss = fn()
    record.backward(loss)
    return {name: (p.grad if p.grad is not None else np.zeros_like(p.values)) for name, p in params.items()}


def grad_check(
    fn: Callable[[], Tensor],
    params: Union[Mapping[str, Tensor], Sequence[Tensor]],
    h: float = DEFAULT_STEP,
    samples: int = 16,
    rng: Optional[np.random.Generator] = None,
    analytic: Optional[Mapping[str, np.ndarray]] = None,
) -> float:
    """Max over sampled coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).

    ``fn`` must rebuild the scalar loss from the current parameter values on
    every call. Runs in 64-bit mode on float64 copies of the parameter
    values; each parameter gets its original array and gradient back on exit.
    """
    if isinstance(params, Mapping):
        params = dict(params.items())
    else:
        params = {f"p{i}": p for i, p in enumerate(params)}
    rng = rng or np.random.default_rng(0)
    saved = {name: (p.values, p.grad) for name, p in params.items()}
    try:
        with precision("float64"):
            for p in params.values():
                p.values = np.array(p.values, dtype=np.float64)
            grads = dict(analytic) if analytic is not None else analytic_gradients(fn, params)
            return _worst_error(fn, params, grads, h, samples, rng)
    finally:
        for name, (values, grad) in saved.items():
            params[name].values = values
            params[name].grad = grad


def _worst_error(fn, params, grads, h, samples, rng) -> float:
    worst = 0.0
    for name in sorted(params):
        p = params[name]
        if p.size <= samples:
            coords = np.arange(p.size)
        else:
            coords = np.sort(rng.choice(p.size, size=samples, replace=False))
        flat = p.values.reshape(-1)
        for idx in coords:
            original = flat[idx]
            flat[idx] = original + h
            up = fn().item()
            flat[idx] = original - h
            down = fn().item()
            flat[idx] = original
            numeric = (up - down) / (2.0 * h)
            exact = float(np.asarray(grads[name]).reshape(-1)[idx])
            worst = max(worst, abs(exact - numeric) / max(1.0, abs(exact), abs(numeric)))
    return worst

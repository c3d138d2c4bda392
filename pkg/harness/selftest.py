"""Built-in verification: gradient checks and return-estimator oracles.

Gradient checks compare recorded gradients against central differences
(h = 1e-5, 64-bit) for every primitive and for downscaled instances of both
belief architectures. Estimator oracles compare the two advantage forms,
the GAE weight mass and the λ limits.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from beliefnet import ConvBeliefNet, ConvNetConfig, FCBeliefNet, FCNetConfig, TrialHistory
from harness import rng as streams
from numerics import Tensor, grad_check, ops, precision
from seekrl import delta_sum_advantages, gae_weights, weighted_advantages

logger = logging.getLogger(__name__)

GRAD_TOLERANCE = 1e-6
ORACLE_TOLERANCE = 1e-10
LIMIT_TOLERANCE = 1e-6
ORACLE_TRACES = 1000
ORACLE_MAX_LENGTH = 50


@dataclass
class CheckResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error)) and self.error < self.tolerance


class SelftestFailure(RuntimeError):
    def __init__(self, failed: list[str]):
        super().__init__(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        self.failed = failed


def probe(out: Tensor) -> Tensor:
    """Scalar Σ w·out with fixed pseudo-random weights for out's shape."""
    weights = np.random.default_rng(out.size).standard_normal(out.shape)
    return ops.sum_(ops.mul(out, ops.constant(weights)))


def _param(rng: np.random.Generator, *shape: int, low: float = -1.0, high: float = 1.0) -> Tensor:
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def primitive_cases(rng: np.random.Generator) -> dict[str, tuple[Callable[[], Tensor], list[Tensor]]]:
    cases = {}

    a, b = _param(rng, 2, 3), _param(rng, 2, 3)
    cases["add"] = (lambda: probe(ops.add(a, b)), [a, b])
    cases["sub"] = (lambda: probe(ops.sub(a, b)), [a, b])
    cases["mul"] = (lambda: probe(ops.mul(a, b)), [a, b])
    cases["scale"] = (lambda: probe(ops.scale(a, 1.7)), [a])
    cases["sigmoid"] = (lambda: probe(ops.sigmoid(a)), [a])
    cases["tanh"] = (lambda: probe(ops.tanh(a)), [a])
    cases["leaky_relu"] = (lambda: probe(ops.leaky_relu(a, 0.1)), [a])

    x = _param(rng, 2, 6)
    cases["reshape"] = (lambda: probe(ops.reshape(x, (3, 4))), [x])
    cases["split"] = (lambda: ops.add(*[probe(p) for p in ops.split(x, [2, 4], axis=1)]), [x])
    c2 = _param(rng, 2, 2)
    cases["concat"] = (lambda: probe(ops.concat([a, c2], axis=1)), [a, c2])
    cases["stack"] = (lambda: probe(ops.stack([a, b], axis=1)), [a, b])
    cases["sum"] = (lambda: probe(ops.sum_(x, axis=1)), [x])
    cases["pick"] = (lambda: probe(ops.pick(x, [1, 5])), [x])

    d, W, bias = _param(rng, 3, 4), _param(rng, 5, 4), _param(rng, 5)
    cases["dense"] = (lambda: probe(ops.dense(d, W, bias)), [d, W, bias])
    ln_x, gain, shift = _param(rng, 3, 6), _param(rng, 6, low=0.5, high=1.5), _param(rng, 6)
    cases["layer_norm"] = (lambda: probe(ops.layer_norm(ln_x, gain, shift)), [ln_x, gain, shift])

    logits = _param(rng, 2, 4)
    allowed = np.array([[True, False, True, True], [False, True, True, False]])
    cases["softmax_masked"] = (lambda: probe(ops.softmax_masked(logits, allowed)), [logits])
    cases["log_softmax_masked"] = (lambda: probe(ops.log_softmax_masked(logits, allowed)), [logits])
    cases["entropy"] = (
        lambda: probe(ops.entropy(ops.softmax(logits), ops.log_softmax_masked(logits, np.ones((2, 4), dtype=bool)))),
        [logits],
    )
    pix = _param(rng, 2, 4, 4)
    cases["block_sum"] = (lambda: probe(ops.block_sum(pix, 2)), [pix])

    img, K, kb = _param(rng, 2, 2, 5, 5), _param(rng, 3, 2, 3, 3), _param(rng, 3)
    cases["conv2d"] = (lambda: probe(ops.conv2d(img, K, kb)), [img, K, kb])
    down_x = _param(rng, 1, 2, 6, 6)
    cases["conv2d_down"] = (lambda: probe(ops.conv2d_down(down_x, K, kb)), [down_x, K, kb])
    up_x, up_K, up_b = _param(rng, 1, 3, 3, 3), _param(rng, 3, 2, 3, 3), _param(rng, 2)
    cases["conv2d_up"] = (lambda: probe(ops.conv2d_up(up_x, up_K, up_b)), [up_x, up_K, up_b])

    lx, lh, lc = _param(rng, 2, 3), _param(rng, 2, 4), _param(rng, 2, 4)
    lstm = {"W": _param(rng, 16, 3), "U": _param(rng, 16, 4), "b": _param(rng, 16)}

    def lstm_loss():
        h, c = ops.lstm_step(lx, lh, lc, lstm)
        return ops.add(probe(h), probe(c))

    cases["lstm_step"] = (lstm_loss, [lx, lh, lc, *lstm.values()])

    probs = _param(rng, 2, 5, low=0.1, high=0.9)
    bits = (rng.uniform(size=(2, 5)) > 0.5).astype(np.float64)
    cases["bernoulli_log_likelihood"] = (lambda: probe(ops.bernoulli_log_likelihood(probs, bits, 1e-6)), [probs])
    cases["gaussian_log_likelihood"] = (lambda: probe(ops.gaussian_log_likelihood(a, np.zeros((2, 3)))), [a])
    cases["categorical_log_likelihood"] = (
        lambda: probe(ops.categorical_log_likelihood(probs, [0, 3], 1e-6)),
        [probs],
    )
    return cases


def _history(question_count: int, arity: int, asked: list[int], rng: np.random.Generator) -> TrialHistory:
    h = TrialHistory(question_count, arity)
    for q in asked:
        h.ask(q, rng.uniform(size=arity))
    return h


def architecture_cases(rng: np.random.Generator) -> dict[str, tuple[Callable[[], Tensor], dict]]:
    fc = FCBeliefNet(FCNetConfig(question_count=4, arity=2, x_shape=(8,), label_count=3, hidden=6, layers=2), rng)
    fc_histories = [_history(4, 2, [1, 3], rng), _history(4, 2, [], rng)]

    def fc_loss():
        out, _ = fc.step(fc_histories, None)
        return ops.add(probe(out.reconstruction), probe(out.labels), probe(out.value), probe(out.log_policy))

    conv = ConvBeliefNet(
        ConvNetConfig(image_shape=(1, 8, 8), block_size=2, label_count=2, depth=1, base_channels=2,
                      max_channels=4, lstm_width=3),
        rng,
    )
    full = _history(16, 4, [5, 0, 10], rng)

    def conv_loss():
        # two recurrent steps so gradients pass through the LSTM state
        state = conv.initial_state(2)
        terms = []
        for t in (1, 2):
            out, state = conv.step([full.prefix(t), full.prefix(t + 1)], state)
            terms += [probe(out.reconstruction), probe(out.labels), probe(out.value), probe(out.log_policy)]
        return ops.add(*terms)

    return {"fc_belief_net": (fc_loss, fc.parameters), "conv_belief_net": (conv_loss, conv.parameters)}


def oracle_lengths(rng: np.random.Generator, count: int = ORACLE_TRACES, longest: int = ORACLE_MAX_LENGTH) -> np.ndarray:
    """Random trace lengths in [1, longest]; the first two are always 1 and ``longest``."""
    lengths = rng.integers(1, longest + 1, size=max(count, 2))
    lengths[:2] = (1, longest)
    return lengths


def estimator_checks(rng: np.random.Generator) -> list[CheckResult]:
    worst = 0.0
    for T in oracle_lengths(rng):
        T = int(T)
        rewards, values = rng.normal(size=T), rng.normal(size=T)
        gamma, lam = float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.05, 0.95))
        diff = weighted_advantages(rewards, values, gamma, lam) - delta_sum_advantages(rewards, values, gamma, lam)
        worst = max(worst, float(np.max(np.abs(diff))))
    results = [CheckResult("gae_delta_sum_agreement", worst, ORACLE_TOLERANCE)]

    mass = max(
        abs(float(gae_weights(n, lam).sum()) - 1.0)
        for n in range(1, 101)
        for lam in (0.01, 0.5, 0.95, 0.999)
    )
    results.append(CheckResult("gae_weight_mass", mass, 1e-12))

    rewards, values = rng.normal(size=12), rng.normal(size=12)
    one_step = rewards + 0.9 * np.append(values[1:], 0.0) - values
    low = weighted_advantages(rewards, values, 0.9, 1e-9) - one_step
    results.append(CheckResult("gae_lambda_to_zero", float(np.max(np.abs(low))), LIMIT_TOLERANCE))
    monte_carlo = np.cumsum(rewards[::-1])[::-1] - values
    high = weighted_advantages(rewards, values, 1.0, 1.0 - 1e-9) - monte_carlo
    results.append(CheckResult("gae_lambda_to_one", float(np.max(np.abs(high))), LIMIT_TOLERANCE))
    return results


def run_selftest(seed: int = 0) -> list[CheckResult]:
    rng = streams.stream(seed, streams.SELFTEST)
    results = []
    with precision("float64"):
        for name, (fn, params) in primitive_cases(rng).items():
            results.append(CheckResult(f"grad:{name}", grad_check(fn, params, rng=rng), GRAD_TOLERANCE))
        for name, (fn, params) in architecture_cases(rng).items():
            results.append(CheckResult(f"grad:{name}", grad_check(fn, params, rng=rng), GRAD_TOLERANCE))
        results.extend(estimator_checks(rng))
    for r in results:
        logger.debug("%s: error %.3e (tolerance %.0e)", r.name, r.error, r.tolerance)
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  {'error':>10}  {'tolerance':>9}  status"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.error:>10.3e}  {r.tolerance:>9.0e}  {'ok' if r.passed else 'FAIL'}")
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} checks passed")
    return "\n".join(lines)

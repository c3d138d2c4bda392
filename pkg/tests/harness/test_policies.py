"""Acting policies and the Hangman baselines against closed forms."""
import numpy as np
import pytest
from scipy import stats

from harness.config import ExperimentConfig
from harness.policies import ModelPolicy, RandomPolicy, baseline_frequency, baseline_random
from harness.rollout import run_episodes
from harness.tasks import build_model_for
from worlds import HangmanEnv, encode_text


def _hangman(text: str, window: int):
    env = HangmanEnv(encode_text(text * 20), window=window)
    config = ExperimentConfig.from_mapping({
        "task": "hangman", "window": window, "hidden": 4, "layers": 1, "rollout_chunk": 50,
    })
    return env, config, build_model_for(config, env)


class TestPolicyDistributions:
    def test_model_policy_renormalizes_over_unasked(self):
        probs = ModelPolicy().distribution(np.array([0.5, 0.3, 0.2]), np.array([True, False, False]))
        np.testing.assert_allclose(probs, [0.0, 0.6, 0.4])

    def test_greedy_takes_the_mode(self, rng):
        q, logp = ModelPolicy().choose(np.array([0.2, 0.7, 0.1]), np.zeros(3, dtype=bool), rng, greedy=True)
        assert q == 1
        assert logp == pytest.approx(np.log(0.7))

    def test_random_is_uniform(self, rng):
        asked = np.zeros(6, dtype=bool)
        asked[2] = True
        policy = baseline_random()
        draws = [policy.choose(None, asked, rng)[0] for _ in range(5000)]
        counts = np.bincount(draws, minlength=6)
        assert counts[2] == 0
        observed = np.delete(counts, 2)
        assert stats.chisquare(observed).pvalue > 1e-3

    def test_random_ignores_greedy(self, rng):
        draws = {RandomPolicy().choose(None, np.zeros(4, dtype=bool), rng, greedy=True)[0] for _ in range(200)}
        assert len(draws) > 1

    def test_frequency_initial_distribution(self):
        policy = baseline_frequency(encode_text("aab "))
        probs = policy.distribution(None, np.zeros(27, dtype=bool))
        assert probs[0] == pytest.approx(0.5)
        assert probs[1] == pytest.approx(0.25)
        assert probs[26] == pytest.approx(0.25)
        assert probs[2:26].sum() == 0.0

    def test_frequency_falls_back_to_uniform(self):
        policy = baseline_frequency(encode_text("ab"))
        asked = np.zeros(27, dtype=bool)
        asked[:2] = True
        probs = policy.distribution(None, asked)
        np.testing.assert_allclose(probs[2:], 1.0 / 25)


class TestHangmanBaselines:
    def test_frequency_policy_never_guesses_wrong(self):
        env, config, model = _hangman("ab ", 3)
        rngs = [np.random.default_rng(i) for i in range(20)]
        traces = run_episodes(env, model, config, rngs, policy=baseline_frequency(env.corpus))
        assert all(t.total_reward == 3.0 for t in traces)
        assert all(len(t) == 3 for t in traces)

    def test_random_policy_expected_reward(self):
        # k present symbols among n: expected wrong guesses (n - k) k / (k + 1)
        env, config, model = _hangman("ab ", 3)
        n, k = 27, 3
        rngs = [np.random.default_rng(i) for i in range(600)]
        traces = run_episodes(env, model, config, rngs, policy=baseline_random())
        wrong = np.array([sum(1 for a in t.answers if not a.any()) for t in traces])
        assert wrong.mean() == pytest.approx((n - k) * k / (k + 1), abs=1.0)
        assert np.mean([t.total_reward for t in traces]) == pytest.approx(-15.0, abs=2.0)

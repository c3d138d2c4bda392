import csv

import numpy as np
import pytest

from harness.errors import ConfigError
from harness.evaluation import belief_curves, completion_cdf, evaluate, hangman_outcomes, write_report_csv
from harness.policies import baseline_frequency
from harness.tasks import build_env, build_model_for
from seekrl import EpisodeTrace


def _trace(steps: int, levels, label_probs, label=0):
    return EpisodeTrace(
        questions=list(range(steps)),
        answers=[np.zeros(1) for _ in range(steps)],
        log_probs=np.zeros(steps),
        values=np.zeros(steps),
        extrinsic=np.zeros(steps),
        intrinsic_levels=np.asarray(levels, dtype=float),
        intrinsic=np.diff(levels),
        label_probs=np.asarray(label_probs, dtype=float),
        label=label,
    )


class TestCurves:
    def test_short_episode_carries_final_belief(self):
        long = _trace(2, [-3.0, -2.0, -1.0], [[0.4, 0.6], [0.6, 0.4], [0.9, 0.1]])
        short = _trace(1, [-3.0, -0.5], [[0.4, 0.6], [0.7, 0.3]])
        accuracy, nll = belief_curves([long, short], horizon=2)
        assert accuracy == [0.0, 1.0, 1.0]
        assert nll == pytest.approx([3.0, 1.25, 0.75])

    def test_unlabelled_traces_have_no_accuracy(self):
        trace = _trace(1, [-1.0, -0.5], [[1.0], [1.0]])
        trace.label_probs = None
        accuracy, nll = belief_curves([trace], horizon=1)
        assert accuracy == []
        assert len(nll) == 2

    def test_completion_cdf(self):
        completed = np.array([True, True, False, True])
        wrong = np.array([0, 2, 1, 5])
        assert completion_cdf(completed, wrong, 5) == [0.25, 0.25, 0.5, 0.5, 0.5, 0.75]

    def test_hangman_outcomes(self):
        trace = _trace(3, [0, 0, 0, 0], [[1.0]] * 4)
        trace.answers = [np.array([1.0, 0.0]), np.zeros(2), np.array([0.0, 1.0])]
        completed, wrong = hangman_outcomes([trace])
        assert completed.tolist() == [True]
        assert wrong.tolist() == [1]


class TestEvaluate:
    def test_report_on_features(self, features_config, tmp_path):
        env = build_env(features_config, "test")
        model = build_model_for(features_config, env)
        report = evaluate(model, env, features_config, episodes=6)
        assert report.episodes == 6
        assert report.policy == "model"
        assert len(report.accuracy_at_t) == features_config.horizon + 1
        assert 0.0 <= report.final_accuracy <= 1.0
        assert report.reward_ci95 >= 0.0
        assert report.completion_cdf == []

        path = write_report_csv(report, tmp_path / "out" / "report.csv")
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["metric", "t", "value"]
        assert ["episodes", "", "6"] in rows
        assert sum(1 for r in rows if r[0] == "nll_at_t") == features_config.horizon + 1

    def test_greedy_evaluation_is_repeatable(self, features_config):
        env = build_env(features_config, "test")
        model = build_model_for(features_config, env)
        a = evaluate(model, env, features_config, episodes=4)
        b = evaluate(model, env, features_config, episodes=4, threads=2)
        assert a == b

    def test_hangman_report_carries_completion(self, hangman_config):
        env = build_env(hangman_config, "test")
        model = build_model_for(hangman_config, env)
        report = evaluate(model, env, hangman_config, episodes=4, policy=baseline_frequency(env.corpus))
        assert report.policy == "freq"
        assert len(report.completion_cdf) == env.space.count + 1
        assert report.completion_cdf[-1] == report.completion_rate
        assert report.final_accuracy is None

    @pytest.mark.parametrize("kwargs", [{"episodes": 0}, {"episodes": 2, "mode": "beam"}])
    def test_rejects_bad_arguments(self, features_config, kwargs):
        env = build_env(features_config, "test")
        model = build_model_for(features_config, env)
        with pytest.raises(ConfigError):
            evaluate(model, env, features_config, **kwargs)

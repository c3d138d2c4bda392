import numpy as np
import pytest

from beliefnet import (
    STATEMENT_DIM, ConvBeliefNet, ConvNetConfig, Conditioning, FCBeliefNet, FCNetConfig, ModelGeometry,
    QuestionError, TrialHistory, auto_depth, block_policy, build_model, encode_fc, encode_image,
)
from numerics import ExhaustedQuestionsError, ShapeError, Tensor, precision
from worlds import observe_pixels
from worlds import errors as world_errors


def _gram(W):
    """Gram matrix over the shorter side, identity for an orthonormal init."""
    W = W.reshape(W.shape[0], -1)
    return W @ W.T if W.shape[0] <= W.shape[1] else W.T @ W


def _history(question_count, arity, asked, seed=0):
    gen = np.random.default_rng(seed)
    h = TrialHistory(question_count, arity)
    for q in asked:
        h.ask(q, gen.uniform(size=arity))
    return h


def _fc(rng, **overrides):
    cfg = dict(question_count=5, arity=2, x_shape=(10,), label_count=3, hidden=8, layers=2)
    cfg.update(overrides)
    return FCBeliefNet(FCNetConfig(**cfg), rng)


def _conv(rng, **overrides):
    cfg = dict(image_shape=(1, 8, 8), block_size=2, label_count=2, base_channels=2, max_channels=4, lstm_width=3)
    cfg.update(overrides)
    return ConvBeliefNet(ConvNetConfig(**cfg), rng)


class TestTrialHistory:
    def test_ask_records_order_and_mask(self):
        h = _history(4, 1, [2, 0])
        assert h.questions == [2, 0]
        np.testing.assert_array_equal(h.asked, [True, False, True, False])

    def test_repeat_is_rejected(self):
        h = _history(3, 1, [1])
        with pytest.raises(QuestionError):
            h.ask(1, [0.0])

    def test_out_of_range_is_rejected(self):
        with pytest.raises(QuestionError):
            TrialHistory(3, 1).ask(3, [0.0])

    def test_wrong_arity(self):
        with pytest.raises(ShapeError):
            TrialHistory(3, 2).ask(0, [1.0])

    def test_prefix_is_independent(self):
        h = _history(4, 1, [3, 1, 2])
        p = h.prefix(1)
        assert p.questions == [3]
        assert not p.asked[1]
        assert len(h) == 3

    def test_question_error_is_the_world_error(self):
        assert QuestionError is world_errors.QuestionError
        with pytest.raises(world_errors.QuestionError):
            TrialHistory(2, 1).ask(-1, [0.0])


class TestEncoding:
    def test_fc_layout(self):
        h = TrialHistory(3, 2)
        h.ask(1, [0.5, 0.25])
        np.testing.assert_array_equal(encode_fc(h, 3), [0, 0, 0.5, 0.25, 0, 0, 0, 1, 0])

    def test_image_places_block_and_visibility(self):
        h = TrialHistory(4, 4)
        h.ask(3, [1.0, 2.0, 3.0, 4.0])
        obs = encode_image(h, (1, 4, 4), 2).observation
        np.testing.assert_array_equal(obs[0, 2:, 2:], [[1, 2], [3, 4]])
        assert obs[1].sum() == 4
        assert obs[0, :2].sum() == 0

    def test_statement_is_tiled_at_quarter_resolution(self):
        h = TrialHistory(16, 48)
        stack = encode_image(h, (3, 16, 16), 4, Conditioning(statement=np.eye(STATEMENT_DIM)[5]))
        assert stack.statement.shape == (STATEMENT_DIM, 4, 4)
        assert stack.statement[5].min() == 1.0
        assert stack.statement.sum() == 16


class TestFCBeliefNet:
    def test_output_shapes(self, rng):
        net = _fc(rng)
        out, _ = net.step([_history(5, 2, [0]), _history(5, 2, [])], None)
        assert out.reconstruction.shape == (2, 10)
        assert out.labels.shape == (2, 3)
        assert out.value.shape == (2,)
        assert out.policy.shape == (2, 5)

    def test_policy_is_zero_on_asked_questions(self, rng):
        net = _fc(rng)
        out, _ = net.step([_history(5, 2, [1, 4])], None)
        p = out.policy.values[0]
        assert p[1] == 0.0 and p[4] == 0.0
        assert p.sum() == pytest.approx(1.0)
        assert out.log_policy.values[0, 1] == 0.0

    def test_distributions_are_normalized(self, rng):
        out, _ = _fc(rng).step([_history(5, 2, [2])], None)
        assert out.labels.values.sum() == pytest.approx(1.0)
        assert np.all((out.reconstruction.values > 0) & (out.reconstruction.values < 1))

    def test_exhausted_history_raises(self, rng):
        net = _fc(rng)
        with pytest.raises(ExhaustedQuestionsError):
            net.step([_history(5, 2, range(5))], None)

    def test_exhausted_history_allowed_for_terminal_beliefs(self, rng):
        out, _ = _fc(rng).step([_history(5, 2, range(5))], None, allow_exhausted=True)
        assert np.all(np.isfinite(out.labels.values))

    def test_rows_do_not_mix(self, rng):
        net = _fc(rng)
        a, b = _history(5, 2, [1], seed=1), _history(5, 2, [3, 0], seed=2)
        together, _ = net.step([a, b], None)
        alone, _ = net.step([b], None)
        np.testing.assert_allclose(together.value.values[1:], alone.value.values, rtol=1e-10)

    def test_zero_heads(self, rng):
        out, _ = _fc(rng, head_init="zeros").step([_history(5, 2, [])], None)
        np.testing.assert_allclose(out.policy.values, 0.2)
        assert out.value.values[0] == 0.0

    def test_hidden_weights_are_orthonormal(self, rng):
        net = _fc(rng, layers=3)
        for layer in range(3):
            W = net.p(f"hidden{layer}.W").values
            np.testing.assert_allclose(_gram(W), np.eye(min(W.shape)), atol=1e-10)

    def test_init_gain_scales_hidden_weights(self, rng):
        W = _fc(rng, init_gain=2.0).p("hidden0.W").values
        np.testing.assert_allclose(_gram(W), 4.0 * np.eye(min(W.shape)), atol=1e-10)

    def test_float32_parameters(self, rng):
        with precision("float32"):
            net = _fc(rng)
            out, _ = net.step([_history(5, 2, [0])], None)
        assert net.p("head.x.W").values.dtype == np.float32
        assert out.value.values.dtype == np.float32


class TestConvBeliefNet:
    def test_auto_depth(self):
        assert auto_depth(28, 28) == 2
        assert auto_depth(104, 104) == 3
        assert auto_depth(8, 8) == 1

    def test_output_shapes_and_state(self, rng):
        net = _conv(rng)
        state = net.initial_state(2)
        out, state = net.step([_history(16, 4, [0]), _history(16, 4, [5, 6])], state)
        assert out.reconstruction.shape == (2, 1, 8, 8)
        assert out.policy.shape == (2, 16)
        assert out.pixel_logits.shape == (2, 8, 8)
        assert state.h.shape == (2, 3)

    def test_policy_is_block_sum_softmax(self, rng):
        net = _conv(rng)
        h = _history(16, 4, [2])
        out, _ = net.step([h], net.initial_state(1))
        expected = block_policy(out.pixel_logits, h.asked[None], 2).values
        np.testing.assert_allclose(out.policy.values, expected, rtol=1e-12)
        assert out.policy.values[0, 2] == 0.0

    def test_kernels_are_orthonormal(self, rng):
        net = _conv(rng, image_shape=(1, 16, 16), block_size=4)
        names = [n for n in net.parameters if n.endswith(".K") and n != "out.K"] + ["top.W"]
        assert "down1.K" in names and "up1.K" in names
        for name in names:
            W = net.p(name).values
            gram = _gram(W)
            np.testing.assert_allclose(gram, np.eye(len(gram)), atol=1e-10, err_msg=name)

    def test_unasked_pixels_do_not_reach_the_output(self, rng):
        net = _conv(rng)
        gen = np.random.default_rng(5)
        image = gen.uniform(size=(1, 8, 8))
        other = image.copy()
        other[0, 4:, :] = gen.uniform(size=(4, 8))
        other[0, :2, 2:4] = 1.0 - image[0, :2, 2:4]
        asked = [0, 3, 5, 6]

        runs = []
        for img in (image, other):
            h = TrialHistory(16, 4)
            state = net.initial_state(1)
            steps = []
            for q in asked:
                h.ask(q, observe_pixels(img, q, 2))
                out, state = net.step([h], state)
                steps.append(out)
            runs.append(steps)

        for a, b in zip(*runs):
            np.testing.assert_array_equal(a.reconstruction.values, b.reconstruction.values)
            np.testing.assert_array_equal(a.policy.values, b.policy.values)
            np.testing.assert_array_equal(a.labels.values, b.labels.values)
            np.testing.assert_array_equal(a.value.values, b.value.values)

    def test_forget_gate_bias_starts_at_one(self, rng):
        b = _conv(rng).p("lstm.b").values
        np.testing.assert_array_equal(b[3:6], 1.0)
        np.testing.assert_array_equal(b[:3], 0.0)

    def test_statement_conditioning(self, rng):
        net = _conv(rng, image_shape=(3, 16, 16), block_size=4, statement_dim=STATEMENT_DIM)
        cond = Conditioning(statement=np.eye(STATEMENT_DIM)[0])
        out, _ = net.step([_history(16, 48, [])], net.initial_state(1), [cond])
        assert out.labels.shape == (1, 2)

    def test_missing_statement_is_a_shape_error(self, rng):
        net = _conv(rng, image_shape=(3, 16, 16), block_size=4, statement_dim=STATEMENT_DIM)
        with pytest.raises(ShapeError):
            net.step([_history(16, 48, [])], net.initial_state(1))

    def test_misaligned_blocks(self, rng):
        with pytest.raises(ShapeError):
            _conv(rng, block_size=3)

    def test_exhausted_history_raises(self, rng):
        net = _conv(rng)
        with pytest.raises(ExhaustedQuestionsError):
            net.step([_history(16, 4, range(16))], net.initial_state(1))


class TestFactory:
    def test_builds_fc(self, rng):
        geometry = ModelGeometry(question_count=4, arity=1, x_shape=(4,), label_count=2, x_model="gaussian")
        model = build_model("fc", geometry, rng, hidden=4, layers=1)
        assert model.architecture == "fc"
        out, _ = model.step([TrialHistory(4, 1)], None)
        assert out.reconstruction.shape == (1, 4)

    def test_conv_needs_image_space(self, rng):
        with pytest.raises(ValueError):
            build_model("conv", ModelGeometry(question_count=4, arity=1, x_shape=(4,)), rng)

    def test_unknown_architecture(self, rng):
        with pytest.raises(ValueError):
            build_model("rnn", ModelGeometry(question_count=4, arity=1, x_shape=(4,)), rng)


class TestParameterSet:
    def test_load_round_trip(self, rng):
        a, b = _fc(rng), _fc(np.random.default_rng(99))
        b.parameters.load(a.parameters.values())
        for name in a.parameters:
            np.testing.assert_array_equal(a.p(name).values, b.p(name).values)

    def test_load_rejects_shape_change(self, rng):
        net = _fc(rng)
        values = net.parameters.values()
        values["head.value.b"] = np.zeros(2)
        with pytest.raises(ShapeError):
            net.parameters.load(values)

    def test_duplicate_name(self, rng):
        net = _fc(rng)
        with pytest.raises(ValueError):
            net.parameters.add("head.value.b", np.zeros(1))

    def test_grads_default_to_zero(self, rng):
        net = _fc(rng)
        assert all(np.all(g == 0) for g in net.parameters.grads().values())
        assert isinstance(net.p("head.value.W"), Tensor)

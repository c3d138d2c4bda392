import json

import numpy as np
import pytest

from beliefnet import STATEMENT_DIM
from worlds import (
    BlockWorldEnv, BlockWorldScene, ClutteredDigitsEnv, CorpusError, CsvFormatError, Episode, FeatureEnv,
    HangmanEnv, IdxFormatError, PlacementError, QuestionError, SceneObject, Statement, corrupt_statement,
    decode_symbols, encode_idx, encode_pgm, encode_statement, encode_text, eval_statement, gen_blockworld,
    gen_cluttered, load_idx, load_mnist, observe_pixels, parse_corpus, parse_features_csv, parse_idx,
    sample_statement, split_corpus, summary_channel, write_idx, write_jsonl,
)
from worlds.blockworld import STATEMENT_MARGIN, relation_holds


class TestIdx:
    def test_labels_golden_bytes(self):
        data = encode_idx(np.array([7, 2, 1], dtype=np.uint8))
        assert data == b"\x00\x00\x08\x01\x00\x00\x00\x03\x07\x02\x01"

    def test_images_header(self):
        data = encode_idx(np.zeros((2, 3, 4), dtype=np.uint8))
        assert data[:16] == b"\x00\x00\x08\x03\x00\x00\x00\x02\x00\x00\x00\x03\x00\x00\x00\x04"
        assert len(data) == 16 + 24

    def test_parse_restores_array(self):
        array = np.arange(12, dtype=np.uint8).reshape(3, 4)
        np.testing.assert_array_equal(parse_idx(encode_idx(array)), array)

    def test_handcrafted_label_file(self, tmp_path):
        path = tmp_path / "labels"
        path.write_bytes(bytes([0, 0, 8, 1, 0, 0, 0, 2, 7, 9]))
        assert load_idx(path).tolist() == [7, 9]

    def test_bad_magic(self):
        with pytest.raises(IdxFormatError):
            parse_idx(b"\x00\x00\x0d\x01\x00\x00\x00\x01\x05")

    def test_truncated_payload(self):
        with pytest.raises(IdxFormatError):
            parse_idx(b"\x00\x00\x08\x01\x00\x00\x00\x03\x07\x02")

    def test_load_mnist_scales_and_checks_counts(self, tmp_path):
        write_idx(tmp_path / "img", np.full((2, 2, 2), 255, dtype=np.uint8))
        write_idx(tmp_path / "lab", np.array([3, 4], dtype=np.uint8))
        x, y = load_mnist(tmp_path / "img", tmp_path / "lab")
        assert x.max() == 1.0
        assert y.tolist() == [3, 4]
        write_idx(tmp_path / "lab", np.array([3], dtype=np.uint8))
        with pytest.raises(IdxFormatError):
            load_mnist(tmp_path / "img", tmp_path / "lab")


class TestPgm:
    def test_golden_bytes(self):
        assert encode_pgm(np.array([[0.0, 1.0, 0.5]])) == b"P5\n3 1\n255\n\x00\xff\x80"

    def test_rgb_is_converted_to_luma(self):
        image = np.zeros((3, 1, 1))
        image[1] = 1.0
        assert encode_pgm(image)[-1] == round(0.587 * 255)

    def test_jsonl_is_sorted_and_line_delimited(self, tmp_path):
        count = write_jsonl(tmp_path / "x.jsonl", [{"b": 1, "a": 2}, {"c": 3}])
        lines = (tmp_path / "x.jsonl").read_text().splitlines()
        assert count == 2
        assert lines[0] == '{"a": 2, "b": 1}'
        assert json.loads(lines[1]) == {"c": 3}


class TestPixels:
    def test_block_order_is_row_major(self):
        image = np.arange(16, dtype=float).reshape(4, 4)
        np.testing.assert_array_equal(observe_pixels(image, 1, 2), [2, 3, 6, 7])
        np.testing.assert_array_equal(observe_pixels(image, 2, 2), [8, 9, 12, 13])

    def test_channel_major(self):
        image = np.stack([np.zeros((2, 2)), np.ones((2, 2))])
        np.testing.assert_array_equal(observe_pixels(image, 0, 2), [0, 0, 0, 0, 1, 1, 1, 1])

    def test_repeat_rejected_with_mask(self):
        with pytest.raises(QuestionError):
            observe_pixels(np.zeros((4, 4)), 0, 2, asked=np.array([True, False, False, False]))


class TestHangman:
    def test_answer_is_occurrence_mask(self):
        env = HangmanEnv(encode_text("banana  "), window=6)
        secret = encode_text("banana")
        np.testing.assert_array_equal(env.observe(secret, 0), [0, 1, 0, 1, 0, 1])
        assert env.native_reward(None, 0, env.observe(secret, 0)) == 1.0
        assert env.native_reward(None, 25, env.observe(secret, 25)) == -1.0

    def test_corpus_remaps_unknown_bytes(self):
        ids, stats = parse_corpus(b"Ab-c")
        assert decode_symbols(ids) == "ab c"
        assert stats.remapped == 1
        assert stats.warnings

    def test_26_symbol_alphabet_drops_spaces(self):
        ids, stats = parse_corpus(b"a b", alphabet_size=26)
        assert decode_symbols(ids, 26) == "ab"
        assert stats.dropped == 1

    def test_split_is_disjoint(self):
        corpus = np.arange(100) % 27
        train, test = split_corpus(corpus)
        assert len(train) == 90 and len(test) == 10

    def test_short_corpus(self):
        with pytest.raises(CorpusError):
            HangmanEnv(encode_text("abc"), window=16)

    def test_done_when_every_present_symbol_asked(self):
        env = HangmanEnv(encode_text("abab abab"), window=4)
        episode = Episode(env, env.sample(np.random.default_rng(0)))
        present = sorted(set(episode.example.x.tolist()))
        for q in present:
            assert not episode.done
            episode.ask(q)
        assert episode.done

    def test_reconstruction_target_is_the_answer_table(self):
        env = HangmanEnv(encode_text("ab" * 10), window=4)
        example = env.sample(np.random.default_rng(1))
        assert env.recon_target(example).shape == (27, 4)


class TestEpisode:
    def test_repeat_question_rejected(self):
        env = HangmanEnv(encode_text("abcdabcd"), window=4)
        episode = Episode(env, env.sample(np.random.default_rng(0)))
        episode.ask(0)
        with pytest.raises(QuestionError):
            episode.ask(0)
        with pytest.raises(QuestionError):
            episode.ask(27)


class TestCluttered:
    def test_clutter_never_touches_the_digit(self, rng):
        digit = np.full((6, 6), 0.5)
        donors = np.ones((3, 6, 6))
        for _ in range(20):
            example = gen_cluttered(digit, 24, 4, 4, donors, rng, label=3)
            r, c = example.meta["digit_offset"]
            np.testing.assert_array_equal(example.x[0, r:r + 6, c:c + 6], digit)
            assert example.x.sum() > digit.sum()
            assert example.y == 3

    def test_impossible_placement(self, rng):
        with pytest.raises(PlacementError):
            gen_cluttered(np.ones((8, 8)), 8, 1, 4, np.ones((1, 8, 8)), rng)

    def test_summary_channel_average_pools(self):
        canvas = np.zeros((1, 8, 8))
        canvas[0, :4, :4] = 1.0
        np.testing.assert_array_equal(summary_channel(canvas, 4)[0], [[1.0, 0.0], [0.0, 0.0]])

    def test_env_space_and_conditioning(self, rng):
        env = ClutteredDigitsEnv(np.ones((2, 4, 4)), np.array([1, 2]), canvas_size=16, clutter_count=1,
                                 patch_size=2, block_size=4, summary_factor=4)
        assert env.space.count == 16 and env.space.arity == 16
        example = env.sample(rng)
        assert env.conditioning(example).summary.shape == (1, 4, 4)
        assert env.geometry().summary_channels == 1


class TestBlockWorld:
    def test_scene_objects_are_disjoint_and_distinct(self, rng):
        for _ in range(20):
            scene = gen_blockworld(rng, 32, (6, 8))
            objs = scene.objects
            assert len({(o.shape, o.color) for o in objs}) == 3
            assert not any(a.intersects(b) for i, a in enumerate(objs) for b in objs[i + 1:])

    def test_render_paints_full_saturation(self):
        scene = BlockWorldScene(8, (SceneObject("square", "red", 2, 0, 0),))
        image = scene.render()
        np.testing.assert_array_equal(image[:, 0, 0], [1.0, 0.0, 0.0])
        assert image[:, 3:, 3:].sum() == 0

    def test_relations_use_centres(self):
        top = SceneObject("square", "red", 2, 0, 4)
        bottom = SceneObject("cross", "blue", 2, 5, 0)
        scene = BlockWorldScene(8, (top, bottom))
        assert eval_statement(scene, Statement(("square", "red"), "above", ("cross", "blue")))
        assert eval_statement(scene, Statement(("square", "red"), "right", ("cross", "blue")))
        assert not eval_statement(scene, Statement(("square", "red"), "below", ("cross", "blue")))
        assert not eval_statement(scene, Statement(("square", "green"), "above", ("cross", "blue")))

    def test_sampled_statements_carry_their_truth(self, rng):
        for _ in range(30):
            scene = gen_blockworld(rng, 32, (6, 8))
            statement, truth = sample_statement(scene, rng)
            assert eval_statement(scene, statement) == truth

    def test_corrupted_statement_is_false(self, rng):
        scene = gen_blockworld(rng, 32, (6, 8))
        statement, _ = sample_statement(scene, rng)
        assert not eval_statement(scene, corrupt_statement(statement, scene, rng))

    @pytest.mark.slow
    @pytest.mark.parametrize("canvas, sizes", [(32, (6, 8)), (64, (12, 16))])
    def test_statement_sweep_over_seeds(self, canvas, sizes):
        truths = set()
        for seed in range(1000):
            gen = np.random.default_rng(seed)
            scene = gen_blockworld(gen, canvas, sizes)
            objs = scene.objects
            assert len({(o.shape, o.color) for o in objs}) == 3
            assert not any(a.intersects(b) for i, a in enumerate(objs) for b in objs[i + 1:])

            statement, truth = sample_statement(scene, gen)
            assert eval_statement(scene, statement) == truth, seed
            if truth:
                a, b = scene.find(*statement.s1), scene.find(*statement.s2)
                assert relation_holds(a, b, statement.relation, STATEMENT_MARGIN), seed
            truths.add(truth)

            corrupted = corrupt_statement(statement, scene, gen)
            assert corrupted != statement
            assert not eval_statement(scene, corrupted), seed
        assert truths == {True, False}

    def test_same_seed_gives_the_same_scene(self):
        for seed in (0, 1, 17):
            a = gen_blockworld(np.random.default_rng(seed), 32, (6, 8))
            b = gen_blockworld(np.random.default_rng(seed), 32, (6, 8))
            assert a == b
            np.testing.assert_array_equal(a.render(), b.render())
        scenes = {gen_blockworld(np.random.default_rng(seed), 32, (6, 8)) for seed in range(5)}
        assert len(scenes) > 1

    def test_same_seed_gives_the_same_example(self):
        env = BlockWorldEnv(canvas=16, sizes=(4,), block_size=4)
        a, b = env.sample(np.random.default_rng(4)), env.sample(np.random.default_rng(4))
        np.testing.assert_array_equal(a.x, b.x)
        assert a.y == b.y
        np.testing.assert_array_equal(env.conditioning(a).statement, env.conditioning(b).statement)

    def test_statement_slot_layout(self):
        vec = encode_statement(Statement(("triangle", "green"), "above", ("diamond", "yellow")))
        assert np.flatnonzero(vec).tolist() == [0, 4, 11, 14, 16]

    def test_statement_encoding_is_five_one_hots(self):
        vec = encode_statement(Statement(("cross", "blue"), "left", ("square", "red")))
        assert vec.shape == (STATEMENT_DIM,)
        assert vec.sum() == 5
        assert vec[2] == vec[4 + 1] == vec[8 + 1] == vec[12 + 3] == vec[16 + 3] == 1.0

    def test_env_labels_and_conditioning(self, rng):
        env = BlockWorldEnv(canvas=16, sizes=(4,), block_size=4)
        example = env.sample(rng)
        assert example.x.shape == (3, 16, 16)
        assert example.y in (0, 1)
        assert env.conditioning(example).statement.shape == (STATEMENT_DIM,)
        assert env.observe(example.x, 0).shape == (48,)


class TestFeatures:
    def test_parse(self):
        data = parse_features_csv("a,b,label\n1,2,0\n3.5,-1,1\n")
        assert data.columns == ("a", "b", "label")
        np.testing.assert_array_equal(data.labels, [0, 1])
        env = FeatureEnv(data)
        assert env.label_count == 2
        np.testing.assert_array_equal(env.observe(data.features[1], 0), [3.5])
        assert env.question_label(1) == "b"

    def test_ragged_row(self):
        with pytest.raises(CsvFormatError) as err:
            parse_features_csv("a,label\n1,0\n2\n")
        assert err.value.row == 2

    def test_non_integer_label(self):
        with pytest.raises(CsvFormatError):
            parse_features_csv("a,label\n1,0.5\n")

    def test_non_numeric_cell(self):
        with pytest.raises(CsvFormatError):
            parse_features_csv("a,label\nx,1\n")

    def test_sample_carries_label(self, rng):
        env = FeatureEnv(parse_features_csv("a,label\n1,0\n2,1\n"))
        example = env.sample(rng)
        assert example.y == int(example.x[0]) - 1

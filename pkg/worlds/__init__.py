# Environments and data ingestion
from worlds.base import Environment, Episode, Example, QuestionSpace
from worlds.blockworld import (
    COLORS, RELATIONS, SHAPES, BlockWorldEnv, BlockWorldScene, SceneObject, Statement,
    corrupt_statement, encode_statement, eval_statement, gen_blockworld, render_scene,
    sample_statement, scene_record,
)
from worlds.cluttered import ClutteredDigitsEnv, gen_cluttered, summary_channel
from worlds.errors import CorpusError, CsvFormatError, IdxFormatError, PlacementError, QuestionError
from worlds.features import FeatureDataset, FeatureEnv, load_features_csv, parse_features_csv
from worlds.hangman import (
    CorpusStats, HangmanEnv, decode_symbols, encode_text, hangman_answer, load_corpus,
    parse_corpus, sample_window, split_corpus,
)
from worlds.idx import encode_idx, load_idx, load_mnist, parse_idx, write_idx
from worlds.pgm import encode_pgm, write_jsonl, write_pgm
from worlds.pixels import observe_pixels

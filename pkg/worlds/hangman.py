"""Hangman over fixed-length windows of a text corpus."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import BaseModel

from beliefnet.history import TrialHistory
from worlds.base import Environment, Example, QuestionSpace
from worlds.errors import CorpusError

logger = logging.getLogger(__name__)

ALPHABET_27 = "abcdefghijklmnopqrstuvwxyz "
ALPHABET_26 = "abcdefghijklmnopqrstuvwxyz"
WINDOW = 16
TRAIN_FRACTION = 0.9


class CorpusStats(BaseModel):
    """Outcome of corpus ingestion."""

    length: int
    alphabet_size: int
    remapped: int = 0
    dropped: int = 0
    warnings: list[str] = []


def alphabet_for(size: int) -> str:
    if size == 27:
        return ALPHABET_27
    if size == 26:
        return ALPHABET_26
    raise ValueError(f"alphabet size must be 26 or 27, got {size}")


def parse_corpus(data: bytes, alphabet_size: int = 27) -> tuple[np.ndarray, CorpusStats]:
    """Symbol ids for ``data``; bytes outside a–z and space become spaces.

    With the 26-symbol alphabet, spaces are removed after remapping.
    """
    alphabet = alphabet_for(alphabet_size)
    raw = np.frombuffer(data, dtype=np.uint8)
    lower = np.where((raw >= ord("A")) & (raw <= ord("Z")), raw + 32, raw)
    letter = (lower >= ord("a")) & (lower <= ord("z"))
    known = letter | (lower == ord(" "))
    remapped = int((~known).sum())
    ids = np.where(letter, lower.astype(np.int64) - ord("a"), 26)
    dropped = 0
    if alphabet_size == 26:
        dropped = int((ids == 26).sum())
        ids = ids[ids != 26]
    stats = CorpusStats(length=int(ids.size), alphabet_size=len(alphabet), remapped=remapped, dropped=dropped)
    if remapped:
        message = f"{remapped} bytes outside the alphabet were mapped to space"
        stats.warnings.append(message)
        logger.warning(message)
    return ids.astype(np.uint8), stats


def load_corpus(path: Union[str, Path], alphabet_size: int = 27) -> tuple[np.ndarray, CorpusStats]:
    return parse_corpus(Path(path).read_bytes(), alphabet_size)


def split_corpus(corpus: np.ndarray, train_fraction: float = TRAIN_FRACTION) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint train/test regions: the first fraction and the remainder."""
    cut = int(len(corpus) * train_fraction)
    return corpus[:cut], corpus[cut:]


def sample_window(corpus: np.ndarray, length: int, rng: np.random.Generator) -> np.ndarray:
    if len(corpus) < length:
        raise CorpusError(f"corpus of {len(corpus)} symbols is shorter than the window of {length}")
    start = int(rng.integers(0, len(corpus) - length + 1))
    return np.array(corpus[start:start + length], dtype=np.int64)


def hangman_answer(secret: np.ndarray, guess: int) -> tuple[np.ndarray, float]:
    """Occurrence mask of ``guess`` in ``secret`` and the ±1 reward."""
    mask = (np.asarray(secret) == int(guess)).astype(np.float64)
    return mask, (1.0 if mask.any() else -1.0)


def encode_text(text: str, alphabet_size: int = 27) -> np.ndarray:
    ids, _ = parse_corpus(text.encode("ascii", errors="replace"), alphabet_size)
    return ids.astype(np.int64)


def decode_symbols(ids, alphabet_size: int = 27) -> str:
    alphabet = alphabet_for(alphabet_size)
    return "".join(alphabet[int(i)] for i in ids)


class HangmanEnv(Environment):
    """Question s reveals every position where symbol s occurs.

    The observable modelled by f^x is the (symbols × positions) occurrence
    table. An episode ends once every position is revealed.
    """

    name = "hangman"
    reward_kind = "native"
    x_model = "bernoulli"
    label_count = 0

    def __init__(self, corpus: np.ndarray, window: int = WINDOW, alphabet_size: int = 27):
        self.alphabet_size = len(alphabet_for(alphabet_size))
        self.corpus = np.asarray(corpus, dtype=np.int64)
        if len(self.corpus) < window:
            raise CorpusError(f"corpus of {len(self.corpus)} symbols is shorter than the window of {window}")
        if self.corpus.size and self.corpus.max() >= self.alphabet_size:
            raise CorpusError(f"corpus contains symbol id {self.corpus.max()} outside the {self.alphabet_size}-symbol alphabet")
        self.window = window
        self.space = QuestionSpace(self.alphabet_size, window)

    @property
    def x_shape(self) -> tuple[int, ...]:
        return (self.alphabet_size, self.window)

    def sample(self, rng: np.random.Generator) -> Example:
        return Example(x=sample_window(self.corpus, self.window, rng))

    def observe(self, x: np.ndarray, question: int) -> np.ndarray:
        return hangman_answer(x, question)[0]

    def recon_target(self, example: Example) -> np.ndarray:
        return self.answer_table(example.x)

    def native_reward(self, example: Example, question: int, answer: np.ndarray) -> float:
        return 1.0 if answer.any() else -1.0

    def is_done(self, example: Example, history: TrialHistory) -> bool:
        present = np.unique(example.x)
        return bool(history.asked[present].all())

    def question_label(self, question: int) -> str:
        return repr(alphabet_for(self.alphabet_size)[question])

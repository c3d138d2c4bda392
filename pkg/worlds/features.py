"""Feature acquisition over tabular data: question i reveals feature i."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from worlds.base import Environment, Example, QuestionSpace
from worlds.errors import CsvFormatError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureDataset:
    features: np.ndarray
    labels: np.ndarray
    columns: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.labels)


def parse_features_csv(text: str) -> FeatureDataset:
    """Header row, numeric cells, final column holds the integer label."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CsvFormatError(0, "file is empty") from None
    if len(header) < 2:
        raise CsvFormatError(0, f"need at least one feature column and a label column, header has {len(header)}")
    rows, labels = [], []
    for index, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(header):
            raise CsvFormatError(index, f"expected {len(header)} cells, found {len(row)}")
        try:
            values = [float(cell) for cell in row[:-1]]
            label = float(row[-1])
        except ValueError as e:
            raise CsvFormatError(index, f"non-numeric cell: {e}") from None
        if label != int(label) or label < 0:
            raise CsvFormatError(index, f"label {row[-1]!r} is not a non-negative integer")
        rows.append(values)
        labels.append(int(label))
    if not rows:
        raise CsvFormatError(1, "no data rows")
    return FeatureDataset(np.array(rows), np.array(labels, dtype=np.int64), tuple(header))


def load_features_csv(path: Union[str, Path]) -> FeatureDataset:
    dataset = parse_features_csv(Path(path).read_text(encoding="utf-8"))
    logger.info("loaded %d rows with %d features from %s", len(dataset), dataset.features.shape[1], path)
    return dataset


class FeatureEnv(Environment):
    """Classify a row from a subset of its features, each worth one question."""

    name = "features"
    reward_kind = "label"
    x_model = "gaussian"

    def __init__(self, dataset: FeatureDataset, label_count: int = 0):
        self.dataset = dataset
        self.label_count = label_count or int(dataset.labels.max()) + 1
        self.space = QuestionSpace(dataset.features.shape[1], 1)

    @property
    def x_shape(self) -> tuple[int, ...]:
        return (self.space.count,)

    def sample(self, rng: np.random.Generator) -> Example:
        idx = int(rng.integers(0, len(self.dataset)))
        return Example(x=self.dataset.features[idx].copy(), y=int(self.dataset.labels[idx]), meta={"row": idx})

    def observe(self, x: np.ndarray, question: int) -> np.ndarray:
        return np.array([float(x[int(question)])])

    def question_label(self, question: int) -> str:
        return self.dataset.columns[question]

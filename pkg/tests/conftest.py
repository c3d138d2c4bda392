"""Shared fixtures: isolated settings and ledger, tiny datasets and configs."""
from pathlib import Path

import numpy as np
import pytest

from database.connection import get_engine, get_session
from harness.config import ExperimentConfig
from harness.settings import get_settings
from worlds import write_idx

CORPUS_TEXT = "the quick brown fox jumps over the lazy dog while a sly cat naps in the sun " * 8


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Run every test in its own directory with its own data dir and ledger."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("ISK_DATA_DIR", str(tmp_path / "data"))
    monkeypatch.setenv("ISK_LEDGER_URL", "sqlite://")
    monkeypatch.setenv("ISK_THREADS", "1")
    get_settings.cache_clear()
    get_engine.cache_clear()
    (tmp_path / "data").mkdir()
    yield
    get_settings.cache_clear()
    get_engine.cache_clear()


@pytest.fixture
def db_session():
    sessions = get_session()
    db = next(sessions)
    yield db
    sessions.close()


@pytest.fixture
def data_dir() -> Path:
    return get_settings().data_dir


def _digit_images(count: int, size: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Crude 'digits': label k lights up column k % size."""
    gen = np.random.default_rng(seed)
    labels = np.arange(count, dtype=np.uint8) % 10
    images = (gen.uniform(size=(count, size, size)) < 0.1).astype(np.uint8) * 80
    for i, label in enumerate(labels):
        images[i, :, int(label) % size] = 255
    return images, labels


@pytest.fixture
def mnist_files(data_dir):
    for prefix, seed in (("train", 1), ("t10k", 2)):
        images, labels = _digit_images(20, 8, seed)
        write_idx(data_dir / f"{prefix}-images-idx3-ubyte", images)
        write_idx(data_dir / f"{prefix}-labels-idx1-ubyte", labels)
    return data_dir


@pytest.fixture
def corpus_file(data_dir):
    path = data_dir / "text8"
    path.write_text(CORPUS_TEXT, encoding="ascii")
    return path


@pytest.fixture
def features_file(data_dir):
    gen = np.random.default_rng(7)
    rows = ["f0,f1,f2,f3,label"]
    for _ in range(40):
        x = gen.normal(size=4)
        rows.append(",".join(f"{v:.6f}" for v in x) + f",{int(x[0] > 0)}")
    path = data_dir / "features.csv"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def features_config(features_file) -> ExperimentConfig:
    return ExperimentConfig.from_mapping({
        "task": "features", "horizon": 3, "hidden": 8, "layers": 1, "batch_size": 4,
        "updates": 2, "rollout_chunk": 2, "learning_rate": 1e-3, "metrics_every": 1,
        "eval_episodes": 6, "seed": 3,
    })


@pytest.fixture
def hangman_config(corpus_file) -> ExperimentConfig:
    return ExperimentConfig.from_mapping({
        "task": "hangman", "window": 6, "hidden": 8, "layers": 1, "batch_size": 3,
        "updates": 1, "rollout_chunk": 2, "eval_episodes": 4, "seed": 5,
    })


@pytest.fixture
def mnist_config(mnist_files) -> ExperimentConfig:
    return ExperimentConfig.from_mapping({
        "task": "mnist28", "canvas": 8, "block_size": 2, "horizon": 4, "base_channels": 2,
        "max_channels": 4, "lstm_width": 4, "batch_size": 3, "updates": 1, "rollout_chunk": 2,
        "eval_episodes": 3, "seed": 11,
    })


@pytest.fixture
def blockworld_config() -> ExperimentConfig:
    return ExperimentConfig.from_mapping({
        "task": "blockworld32", "canvas": 16, "sizes": "4", "block_size": 4, "horizon": 3,
        "base_channels": 2, "max_channels": 4, "lstm_width": 4, "batch_size": 2, "updates": 1,
        "eval_episodes": 2, "seed": 2,
    })

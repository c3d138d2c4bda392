"""IDX (MNIST) file reading and writing.

Header: big-endian u32 magic 0x000008NN where NN is the dimension count
(only unsigned-byte data, type code 0x08, is supported), then one
big-endian u32 per dimension, then the raw bytes.
"""
from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from worlds.errors import IdxFormatError

logger = logging.getLogger(__name__)

UBYTE_TYPE = 0x08
LABELS_MAGIC = 0x00000801
IMAGES_MAGIC = 0x00000803


def parse_idx(data: bytes) -> np.ndarray:
    if len(data) < 4:
        raise IdxFormatError(f"IDX header needs 4 bytes, file has {len(data)}")
    (magic,) = struct.unpack(">I", data[:4])
    if magic >> 16 != 0 or (magic >> 8) & 0xFF != UBYTE_TYPE or magic & 0xFF == 0:
        raise IdxFormatError(f"bad IDX magic 0x{magic:08x}; expected 0x000008NN")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise IdxFormatError(f"IDX header needs {header} bytes for {ndim} dimensions, file has {len(data)}")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    expected = int(np.prod(dims, dtype=np.int64))
    actual = len(data) - header
    if actual != expected:
        raise IdxFormatError(f"IDX payload for shape {dims} needs {expected} bytes, found {actual}")
    return np.frombuffer(data, dtype=np.uint8, offset=header).reshape(dims).copy()


def load_idx(path: Union[str, Path]) -> np.ndarray:
    array = parse_idx(Path(path).read_bytes())
    logger.debug("loaded IDX %s with shape %s", path, array.shape)
    return array


def encode_idx(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise IdxFormatError(f"only unsigned-byte arrays can be written, got {array.dtype}")
    header = struct.pack(">I", (UBYTE_TYPE << 8) | array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    return header + array.tobytes()


def write_idx(path: Union[str, Path], array: np.ndarray) -> None:
    Path(path).write_bytes(encode_idx(array))


def load_mnist(images_path: Union[str, Path], labels_path: Union[str, Path]) -> tuple[np.ndarray, np.ndarray]:
    """Images scaled to [0, 1] and integer labels."""
    images = load_idx(images_path)
    labels = load_idx(labels_path)
    if images.ndim != 3 or labels.ndim != 1:
        raise IdxFormatError(f"expected 3-D images and 1-D labels, got {images.shape} and {labels.shape}")
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    return images.astype(np.float64) / 255.0, labels.astype(np.int64)

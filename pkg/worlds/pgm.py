"""PGM (P5) image dumps and the JSON-lines scene sidecar."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Union

import numpy as np

GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


def to_gray_bytes(image: np.ndarray) -> np.ndarray:
    """(H, W), (1, H, W) or (3, H, W) values in [0, 1] → uint8 (H, W)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3 and image.shape[0] == 3:
        image = np.tensordot(GRAY_WEIGHTS, image, axes=1)
    elif image.ndim == 3 and image.shape[0] == 1:
        image = image[0]
    elif image.ndim != 2:
        raise ValueError(f"cannot write image of shape {image.shape} as grayscale")
    return np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def encode_pgm(image: np.ndarray) -> bytes:
    pixels = to_gray_bytes(image)
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def write_pgm(path: Union[str, Path], image: np.ndarray) -> None:
    Path(path).write_bytes(encode_pgm(image))


def write_jsonl(path: Union[str, Path], records: Iterable[dict]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + "\n")
            count += 1
    return count

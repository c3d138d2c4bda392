"""Block-of-pixels observation function."""
from __future__ import annotations

from typing import Optional

import numpy as np

from beliefnet.encoding import block_origin, check_blocks
from worlds.errors import QuestionError


def observe_pixels(image: np.ndarray, question: int, block_size: int, asked: Optional[np.ndarray] = None) -> np.ndarray:
    """Pixels of block ``question``, channel-major then row-major.

    ``image`` is (C, H, W) or (H, W). When ``asked`` is given, a repeated
    question is rejected.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[None]
    nh, nw = check_blocks(image.shape, block_size)
    if not 0 <= int(question) < nh * nw:
        raise QuestionError(f"block {question} outside [0, {nh * nw})")
    if asked is not None and asked[int(question)]:
        raise QuestionError(f"block {question} was already asked")
    r, c = block_origin(question, image.shape, block_size)
    return image[:, r:r + block_size, c:c + block_size].reshape(-1).copy()

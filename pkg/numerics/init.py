"""Parameter initializers."""
import numpy as np

from numerics.tensor import get_dtype


def orthogonal_init(rows: int, cols: int, rng: np.random.Generator, gain: float = 1.0) -> np.ndarray:
    """Gaussian sample orthonormalized by QR with the diagonal sign fixed.

    Rows are orthonormal when rows <= cols, columns otherwise.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"orthogonal_init needs positive extents, got {rows}x{cols}")
    big, small = max(rows, cols), min(rows, cols)
    a = rng.standard_normal((big, small))
    q, r = np.linalg.qr(a)
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    if rows < cols:
        q = q.T
    return (gain * q).astype(get_dtype())


def orthogonal_kernel(c_out: int, c_in: int, k: int, rng: np.random.Generator, gain: float = 1.0) -> np.ndarray:
    """Convolution kernel reshaped from a (c_out, c_in*k*k) orthogonal matrix."""
    return orthogonal_init(c_out, c_in * k * k, rng, gain).reshape(c_out, c_in, k, k)

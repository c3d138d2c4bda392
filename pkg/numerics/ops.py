"""Differentiable primitives.

Every primitive computes its value with numpy and registers an explicit
vector-Jacobian product. A leading batch axis is allowed everywhere; batch
elements never mix and reductions over the batch run in index order.
No implicit broadcasting: operands of elementwise ops must agree exactly.
"""
from __future__ import annotations

from typing import Mapping, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from numerics.errors import ExhaustedQuestionsError, ShapeError
from numerics.tensor import Tensor, as_tensor, emit, get_dtype

DEFAULT_SLOPE = 0.01
DEFAULT_LN_EPS = 1e-5


def _check_same(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: operand shapes differ: {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# elementwise and structural
# ---------------------------------------------------------------------------

def add(*xs) -> Tensor:
    ts = [as_tensor(x) for x in xs]
    for t in ts[1:]:
        _check_same("add", ts[0], t)
    out = ts[0].values.copy()
    for t in ts[1:]:
        out = out + t.values
    return emit("add", out, ts, lambda g: [g] * len(ts))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same("sub", a, b)
    return emit("sub", a.values - b.values, (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same("mul", a, b)
    av, bv = a.values, b.values
    return emit("mul", av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(x, c: float) -> Tensor:
    x = as_tensor(x)
    return emit("scale", x.values * c, (x,), lambda g: (g * c,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    s = 0.5 * (1.0 + np.tanh(0.5 * x.values))
    return emit("sigmoid", s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.values)
    return emit("tanh", t, (x,), lambda g: (g * (1.0 - t * t),))


def leaky_relu(x, slope: float = DEFAULT_SLOPE) -> Tensor:
    """Elementwise max(x, slope*x); the subgradient at 0 is ``slope``."""
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky_relu slope must lie in (0, 1), got {slope}")
    x = as_tensor(x)
    positive = x.values > 0
    out = np.where(positive, x.values, slope * x.values)
    return emit("leaky_relu", out, (x,), lambda g: (np.where(positive, g, slope * g),))


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    original = x.shape
    try:
        out = x.values.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view {original} as {tuple(shape)}") from exc
    return emit("reshape", out, (x,), lambda g: (g.reshape(original),))


def concat(xs: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(x) for x in xs]
    try:
        out = np.concatenate([t.values for t in ts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in ts]} on axis {axis}") from exc
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return emit("concat", out, ts, lambda g: np.split(g, bounds, axis=axis))


def slice_axis(x, start: int, stop: int, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    index = [slice(None)] * x.values.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def backward(g):
        gx = np.zeros_like(x.values)
        gx[index] = g
        return (gx,)

    return emit("slice", x.values[index].copy(), (x,), backward)


def split(x, sizes: Sequence[int], axis: int = -1) -> list[Tensor]:
    x = as_tensor(x)
    if sum(sizes) != x.shape[axis]:
        raise ShapeError(f"split: sizes {list(sizes)} do not cover extent {x.shape[axis]}")
    parts, start = [], 0
    for size in sizes:
        parts.append(slice_axis(x, start, start + size, axis))
        start += size
    return parts


def stack(xs: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(x) for x in xs]
    for t in ts[1:]:
        _check_same("stack", ts[0], t)
    out = np.stack([t.values for t in ts], axis=axis)
    return emit("stack", out, ts, lambda g: [np.take(g, i, axis=axis) for i in range(len(ts))])


def sum_(x, axis=None) -> Tensor:
    """Sum over ``axis`` (all axes when None)."""
    x = as_tensor(x)
    shape = x.shape
    out = np.sum(x.values, axis=axis)

    def backward(g):
        if axis is None:
            return (np.full(shape, g, dtype=x.values.dtype),)
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        expanded = np.expand_dims(g, tuple(a % len(shape) for a in axes))
        return (np.broadcast_to(expanded, shape).copy(),)

    return emit("sum", out, (x,), backward)


def pick(x, index) -> Tensor:
    """Gather ``x[..., index]`` along the last axis, one index per row."""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.int64)
    if index.shape != x.shape[:-1]:
        raise ShapeError(f"pick: index shape {index.shape} does not match rows {x.shape[:-1]}")
    if index.size and (index.min() < 0 or index.max() >= x.shape[-1]):
        raise ShapeError(f"pick: index out of range for extent {x.shape[-1]}")
    out = np.take_along_axis(x.values, index[..., None], axis=-1)[..., 0]

    def backward(g):
        gx = np.zeros_like(x.values)
        np.put_along_axis(gx, index[..., None], g[..., None], axis=-1)
        return (gx,)

    return emit("pick", out, (x,), backward)


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------

def dense(x, W, b=None) -> Tensor:
    """y = W x + b over the last axis of ``x``."""
    x, W = as_tensor(x), as_tensor(W)
    if W.values.ndim != 2 or x.values.ndim < 1 or x.shape[-1] != W.shape[1]:
        raise ShapeError(f"dense: input extent {x.shape[-1:]} incompatible with weight {W.shape}")
    m, n = W.shape
    inputs = [x, W]
    out = x.values @ W.values.T
    if b is not None:
        b = as_tensor(b)
        if b.shape != (m,):
            raise ShapeError(f"dense: bias shape {b.shape} does not match output extent {m}")
        out = out + b.values
        inputs.append(b)
    xv, Wv = x.values, W.values

    def backward(g):
        g2 = g.reshape(-1, m)
        grads = [g @ Wv, g2.T @ xv.reshape(-1, n)]
        if b is not None:
            grads.append(g2.sum(axis=0))
        return grads

    return emit("dense", out, inputs, backward)


def layer_norm(x, gain, bias, eps: float = DEFAULT_LN_EPS) -> Tensor:
    """Normalize the last axis to zero mean / unit population variance."""
    if eps <= 0:
        raise ValueError(f"layer_norm eps must be positive, got {eps}")
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    n = x.shape[-1]
    if gain.shape != (n,) or bias.shape != (n,):
        raise ShapeError(f"layer_norm: gain {gain.shape} / bias {bias.shape} do not match extent {n}")
    mu = x.values.mean(axis=-1, keepdims=True)
    centered = x.values - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = gain.values * xhat + bias.values
    gv = gain.values

    def backward(g):
        dxhat = g * gv
        dx = inv_std / n * (
            n * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )
        return dx, (g * xhat).reshape(-1, n).sum(axis=0), g.reshape(-1, n).sum(axis=0)

    return emit("layer_norm", out, (x, gain, bias), backward)


def _allowed_mask(logits: Tensor, allowed) -> np.ndarray:
    mask = np.asarray(allowed, dtype=bool)
    if mask.shape != logits.shape:
        raise ShapeError(f"mask shape {mask.shape} does not match logits {logits.shape}")
    if not mask.any(axis=-1).all():
        raise ExhaustedQuestionsError("every question has already been asked")
    return mask


def _masked_log_softmax(values: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    shifted = np.where(mask, values, -np.inf)
    shifted = shifted - shifted.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(np.where(mask, shifted, 0.0)), 0.0)
    total = e.sum(axis=-1, keepdims=True)
    p = e / total
    logp = np.where(mask, np.where(mask, shifted, 0.0) - np.log(total), 0.0)
    return p, logp


def softmax_masked(logits, allowed) -> Tensor:
    """Softmax over allowed entries; disallowed entries are exactly 0."""
    logits = as_tensor(logits)
    mask = _allowed_mask(logits, allowed)
    p, _ = _masked_log_softmax(logits.values, mask)

    def backward(g):
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return emit("softmax_masked", p, (logits,), backward)


def log_softmax_masked(logits, allowed) -> Tensor:
    """Log-probabilities over allowed entries; disallowed entries hold 0."""
    logits = as_tensor(logits)
    mask = _allowed_mask(logits, allowed)
    p, logp = _masked_log_softmax(logits.values, mask)

    def backward(g):
        g = np.where(mask, g, 0.0)
        return (g - p * g.sum(axis=-1, keepdims=True),)

    return emit("log_softmax_masked", logp, (logits,), backward)


def softmax(logits) -> Tensor:
    logits = as_tensor(logits)
    return softmax_masked(logits, np.ones(logits.shape, dtype=bool))


def block_sum(x, block: int) -> Tensor:
    """Sum (B, H, W) maps over non-overlapping block×block tiles, row-major."""
    x = as_tensor(x)
    if x.values.ndim != 3:
        raise ShapeError(f"block_sum expects (batch, H, W), got {x.shape}")
    B, H, W = x.shape
    if H % block or W % block:
        raise ShapeError(f"block_sum: block {block} does not divide extents {H}x{W}")
    nh, nw = H // block, W // block
    out = x.values.reshape(B, nh, block, nw, block).sum(axis=(2, 4)).reshape(B, nh * nw)

    def backward(g):
        tiles = np.broadcast_to(g.reshape(B, nh, 1, nw, 1), (B, nh, block, nw, block))
        return (tiles.reshape(B, H, W).copy(),)

    return emit("block_sum", out, (x,), backward)


# ---------------------------------------------------------------------------
# convolutions
# ---------------------------------------------------------------------------

def _same_padding(k: int, stride: int, extent: int) -> tuple[int, int]:
    out = extent // stride
    total = max((out - 1) * stride + k - extent, 0)
    return total // 2, total - total // 2


def _im2col(xp: np.ndarray, k: int, stride: int, out_h: int, out_w: int) -> np.ndarray:
    B, C = xp.shape[:2]
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    windows = windows[:, :, :out_h, :out_w]
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(B * out_h * out_w, C * k * k)


def _col2im(cols: np.ndarray, padded_shape: tuple, k: int, stride: int, out_h: int, out_w: int) -> np.ndarray:
    B, C, Hp, Wp = padded_shape
    cols = cols.reshape(B, out_h, out_w, C, k, k)
    xp = np.zeros(padded_shape, dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            xp[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += (
                cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    return xp


def _as_batch(x: Tensor) -> tuple[Tensor, bool]:
    if x.values.ndim == 3:
        return reshape(x, (1,) + x.shape), True
    if x.values.ndim != 4:
        raise ShapeError(f"convolution input must be (C,H,W) or (B,C,H,W), got {x.shape}")
    return x, False


def _conv(x, K, b, stride: int, op: str) -> Tensor:
    x, K = as_tensor(x), as_tensor(K)
    x, unbatched = _as_batch(x)
    B, C, H, W = x.shape
    if K.values.ndim != 4 or K.shape[1] != C or K.shape[2] != K.shape[3]:
        raise ShapeError(f"{op}: kernel {K.shape} incompatible with input channels {C}")
    if stride == 2 and (H % 2 or W % 2):
        raise ShapeError(f"{op}: odd extents {H}x{W} cannot be halved")
    Co, _, k, _ = K.shape
    out_h, out_w = H // stride, W // stride
    pt, pb = _same_padding(k, stride, H)
    pl, pr = _same_padding(k, stride, W)
    xp = np.pad(x.values, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    cols = _im2col(xp, k, stride, out_h, out_w)
    Kmat = K.values.reshape(Co, -1)
    out = (cols @ Kmat.T).reshape(B, out_h, out_w, Co).transpose(0, 3, 1, 2)
    inputs = [x, K]
    if b is not None:
        b = as_tensor(b)
        if b.shape != (Co,):
            raise ShapeError(f"{op}: bias {b.shape} does not match {Co} output channels")
        out = out + b.values[None, :, None, None]
        inputs.append(b)

    def backward(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, Co)
        gK = (g2.T @ cols).reshape(K.shape)
        gxp = _col2im(g2 @ Kmat, xp.shape, k, stride, out_h, out_w)
        grads = [gxp[:, :, pt:pt + H, pl:pl + W], gK]
        if b is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    y = emit(op, np.ascontiguousarray(out), inputs, backward)
    return reshape(y, y.shape[1:]) if unbatched else y


def conv2d(x, K, b=None) -> Tensor:
    """Stride-1 same-padded cross-correlation."""
    return _conv(x, K, b, 1, "conv2d")


def conv2d_down(x, K, b=None) -> Tensor:
    """Stride-2 same-padded cross-correlation: exactly half resolution."""
    return _conv(x, K, b, 2, "conv2d_down")


def conv2d_up(x, K, b=None) -> Tensor:
    """Transposed stride-2 convolution, the adjoint of ``conv2d_down``.

    ``K`` has shape (C_in, C_out, k, k): the same kernel that maps C_out
    channels down to C_in channels in ``conv2d_down``.
    """
    x, K = as_tensor(x), as_tensor(K)
    x, unbatched = _as_batch(x)
    B, Ci, h, w = x.shape
    if K.values.ndim != 4 or K.shape[0] != Ci or K.shape[2] != K.shape[3]:
        raise ShapeError(f"conv2d_up: kernel {K.shape} incompatible with input channels {Ci}")
    _, Co, k, _ = K.shape
    H, W = 2 * h, 2 * w
    pt, pb = _same_padding(k, 2, H)
    pl, pr = _same_padding(k, 2, W)
    padded_shape = (B, Co, H + pt + pb, W + pl + pr)
    Kmat = K.values.reshape(Ci, -1)
    y2 = x.values.transpose(0, 2, 3, 1).reshape(-1, Ci)
    out = _col2im(y2 @ Kmat, padded_shape, k, 2, h, w)[:, :, pt:pt + H, pl:pl + W]
    inputs = [x, K]
    if b is not None:
        b = as_tensor(b)
        if b.shape != (Co,):
            raise ShapeError(f"conv2d_up: bias {b.shape} does not match {Co} output channels")
        out = out + b.values[None, :, None, None]
        inputs.append(b)

    def backward(g):
        gp = np.pad(g, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
        gcols = _im2col(gp, k, 2, h, w)
        gx = (gcols @ Kmat.T).reshape(B, h, w, Ci).transpose(0, 3, 1, 2)
        grads = [gx, (y2.T @ gcols).reshape(K.shape)]
        if b is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    y = emit("conv2d_up", np.ascontiguousarray(out), inputs, backward)
    return reshape(y, y.shape[1:]) if unbatched else y


# ---------------------------------------------------------------------------
# recurrent
# ---------------------------------------------------------------------------

def lstm_step(x, h, c, params: Mapping[str, Tensor]) -> tuple[Tensor, Tensor]:
    """One LSTM step; gate layout in W, U, b is [input, forget, output, candidate]."""
    h, c = as_tensor(h), as_tensor(c)
    m = h.shape[-1]
    if c.shape != h.shape or params["b"].shape != (4 * m,):
        raise ShapeError(f"lstm_step: state {h.shape}/{c.shape} incompatible with bias {params['b'].shape}")
    gates = add(dense(x, params["W"], params["b"]), dense(h, params["U"]))
    i_raw, f_raw, o_raw, g_raw = split(gates, [m, m, m, m])
    i, f, o, g = sigmoid(i_raw), sigmoid(f_raw), sigmoid(o_raw), tanh(g_raw)
    c_next = add(mul(f, c), mul(i, g))
    h_next = mul(o, tanh(c_next))
    return h_next, c_next


# ---------------------------------------------------------------------------
# likelihoods (leading axis is the batch axis; result has shape (batch,))
# ---------------------------------------------------------------------------

def _trailing_axes(x: np.ndarray) -> tuple:
    if x.ndim < 2:
        raise ShapeError(f"likelihoods expect a leading batch axis, got shape {x.shape}")
    return tuple(range(1, x.ndim))


def bernoulli_log_likelihood(probs, target, floor: float) -> Tensor:
    """Σ x log p + (1-x) log(1-p), probabilities floored at ``floor``."""
    probs = as_tensor(probs)
    x = np.asarray(target, dtype=probs.values.dtype)
    if x.shape != probs.shape:
        raise ShapeError(f"bernoulli_log_likelihood: target {x.shape} vs probs {probs.shape}")
    p = probs.values
    on, off = p > floor, (1.0 - p) > floor
    terms = x * np.log(np.maximum(p, floor)) + (1.0 - x) * np.log(np.maximum(1.0 - p, floor))
    out = terms.sum(axis=_trailing_axes(p))

    def backward(g):
        g = g.reshape(g.shape + (1,) * (p.ndim - 1))
        dp = np.where(on, x / np.where(on, p, 1.0), 0.0) - np.where(off, (1.0 - x) / np.where(off, 1.0 - p, 1.0), 0.0)
        return (g * dp,)

    return emit("bernoulli_log_likelihood", out, (probs,), backward)


def gaussian_log_likelihood(mean, target) -> Tensor:
    """Unit-variance Gaussian log-likelihood without the constant: -½Σ(x-μ)²."""
    mean = as_tensor(mean)
    x = np.asarray(target, dtype=mean.values.dtype)
    if x.shape != mean.shape:
        raise ShapeError(f"gaussian_log_likelihood: target {x.shape} vs mean {mean.shape}")
    diff = x - mean.values
    out = -0.5 * (diff * diff).sum(axis=_trailing_axes(diff))

    def backward(g):
        return (g.reshape(g.shape + (1,) * (diff.ndim - 1)) * diff,)

    return emit("gaussian_log_likelihood", out, (mean,), backward)


def categorical_log_likelihood(probs, labels, floor: float) -> Tensor:
    """log max(p[y], floor) per row."""
    probs = as_tensor(probs)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.values.ndim != 2 or labels.shape != probs.shape[:1]:
        raise ShapeError(f"categorical_log_likelihood: labels {labels.shape} vs probs {probs.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise ValueError(f"label index out of range for {probs.shape[1]} classes")
    chosen = probs.values[np.arange(len(labels)), labels]
    out = np.log(np.maximum(chosen, floor))

    def backward(g):
        gp = np.zeros_like(probs.values)
        live = chosen > floor
        gp[np.arange(len(labels)), labels] = np.where(live, g / np.where(live, chosen, 1.0), 0.0)
        return (gp,)

    return emit("categorical_log_likelihood", out, (probs,), backward)


def entropy(probs, log_probs) -> Tensor:
    """Row entropy −Σ p log p from matching probability/log-probability tensors."""
    return scale(sum_(mul(probs, log_probs), axis=-1), -1.0)


def constant(values, dtype: Optional[type] = None) -> Tensor:
    return Tensor(np.asarray(values, dtype=dtype or get_dtype()))

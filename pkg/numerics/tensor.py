"""Tensors and the computation record used for reverse-mode gradients.

A ``Tensor`` wraps a numpy array. Operations executed while a
``ComputationRecord`` is active append one node per primitive, in execution
order; ``ComputationRecord.backward`` walks that list in reverse, visiting
each node exactly once and accumulating fan-out gradients additively.
Without an active record operations only compute values.
"""
from __future__ import annotations

import contextvars
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from numerics.errors import ShapeError

PRECISIONS = {"float64": np.float64, "float32": np.float32}

_precision: contextvars.ContextVar[str] = contextvars.ContextVar("precision", default="float64")
_active_record: contextvars.ContextVar[Optional["ComputationRecord"]] = contextvars.ContextVar(
    "active_record", default=None
)


def get_dtype() -> type:
    """Return the numpy dtype for newly created tensors."""
    return PRECISIONS[_precision.get()]


def set_default_precision(name: str) -> None:
    """Set the process-wide precision ('float64' or 'float32')."""
    if name not in PRECISIONS:
        raise ValueError(f"unknown precision '{name}', expected one of {sorted(PRECISIONS)}")
    _precision.set(name)


@contextmanager
def precision(name: str) -> Iterator[None]:
    """Temporarily switch precision inside a block."""
    if name not in PRECISIONS:
        raise ValueError(f"unknown precision '{name}', expected one of {sorted(PRECISIONS)}")
    token = _precision.set(name)
    try:
        yield
    finally:
        _precision.reset(token)


class Tensor:
    """n-dimensional array of reals with an optional gradient slot."""

    __slots__ = ("values", "grad", "requires_grad", "name")

    def __init__(self, values, requires_grad: bool = False, name: Optional[str] = None):
        self.values = np.asarray(values, dtype=get_dtype())
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def size(self) -> int:
        return int(self.values.size)

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.values

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.values.shape:
            raise ShapeError(f"gradient shape {grad.shape} does not match tensor shape {self.values.shape}")
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    def __repr__(self) -> str:
        label = f" '{self.name}'" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    """Wrap arrays and scalars as constant tensors; pass tensors through."""
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass(frozen=True)
class RecordNode:
    """One executed primitive: its output, inputs and adjoint."""

    op: str
    output: Tensor
    inputs: tuple
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class ComputationRecord:
    """Ordered list of executed primitives, replayable in reverse."""

    def __init__(self):
        self.nodes: list[RecordNode] = []
        self._token = None

    def __enter__(self) -> "ComputationRecord":
        self._token = _active_record.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _active_record.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def append(self, node: RecordNode) -> None:
        self.nodes.append(node)

    def backward(self, loss: Tensor, seed: Optional[np.ndarray] = None) -> None:
        """Accumulate d(loss)/d(leaf) into the ``grad`` of every leaf tensor.

        Leaves are tensors with ``requires_grad`` that no recorded node produced
        (parameters). Intermediate tensors keep ``grad`` untouched.
        """
        if seed is None:
            if loss.size != 1:
                raise ShapeError(f"backward needs a scalar loss or an explicit seed, got shape {loss.shape}")
            seed = np.ones_like(loss.values)
        grads: dict[int, np.ndarray] = {id(loss): np.asarray(seed, dtype=loss.values.dtype)}
        owners: dict[int, Tensor] = {id(loss): loss}

        for node in reversed(self.nodes):
            g = grads.pop(id(node.output), None)
            owners.pop(id(node.output), None)
            if g is None:
                continue
            for inp, ig in zip(node.inputs, node.backward(g)):
                if ig is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + ig
                else:
                    grads[key] = np.array(ig, dtype=inp.values.dtype, copy=True)
                    owners[key] = inp

        for key, g in grads.items():
            leaf = owners[key]
            if leaf.requires_grad:
                leaf.accumulate(g.reshape(leaf.shape))


def active_record() -> Optional[ComputationRecord]:
    return _active_record.get()


def emit(op: str, values: np.ndarray, inputs: Sequence[Tensor], backward) -> Tensor:
    """Create an op output and record it when gradients are being tracked."""
    record = _active_record.get()
    needs_grad = record is not None and any(t.requires_grad for t in inputs)
    out = Tensor(values, requires_grad=needs_grad)
    if needs_grad:
        record.append(RecordNode(op=op, output=out, inputs=tuple(inputs), backward=backward))
    return out

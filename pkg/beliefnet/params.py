"""Named parameter tensors for one model instance."""
from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np

from numerics.errors import ShapeError
from numerics.tensor import Tensor


class ParameterSet(Mapping[str, Tensor]):
    """Ordered, uniquely named parameters whose shapes are fixed at creation."""

    def __init__(self):
        self._tensors: dict[str, Tensor] = {}

    def add(self, name: str, values: np.ndarray) -> Tensor:
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name '{name}'")
        tensor = Tensor(values, requires_grad=True, name=name)
        self._tensors[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    @property
    def count(self) -> int:
        """Total number of scalar parameters."""
        return sum(t.size for t in self._tensors.values())

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.zero_grad()

    def grads(self) -> dict[str, np.ndarray]:
        return {
            name: (t.grad if t.grad is not None else np.zeros_like(t.values))
            for name, t in self._tensors.items()
        }

    def values(self) -> dict[str, np.ndarray]:  # type: ignore[override]
        return {name: t.values.copy() for name, t in self._tensors.items()}

    def load(self, values: Mapping[str, np.ndarray]) -> None:
        """Overwrite parameter values; names and shapes must match exactly."""
        missing = set(self._tensors) - set(values)
        extra = set(values) - set(self._tensors)
        if missing or extra:
            raise ValueError(f"parameter names differ: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, t in self._tensors.items():
            v = np.asarray(values[name])
            if v.shape != t.shape:
                raise ShapeError(f"parameter '{name}' has shape {t.shape}, loaded {v.shape}")
            t.values = v.astype(t.values.dtype, copy=True)

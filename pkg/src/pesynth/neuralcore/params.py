"""Named parameter storage and initializers."""
from __future__ import annotations

import math

import numpy as np

from .tensor import Tensor, default_dtype


class ParamStore:
    """Ordered name -> Tensor map; every entry is trainable."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self._params: dict[str, Tensor] = {}

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name) -> Tensor:
        return self._params[name]

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> list:
        return list(self._params)

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        t = Tensor(np.asarray(value, dtype=default_dtype()), requires_grad=True)
        self._params[name] = t
        return t

    def set(self, name: str, value) -> None:
        old = self._params[name]
        value = np.asarray(value, dtype=old.data.dtype)
        if value.shape != old.shape:
            raise ValueError(f"{name}: shape {value.shape} != {old.shape}")
        old.data = value.copy()

    def linear(self, name: str, fan_in: int, fan_out: int, bias: bool = True) -> None:
        bound = math.sqrt(6.0 / fan_in) / math.sqrt(2.0)  # uniform Kaiming, gain 1
        self.add(f"{name}.w", self.rng.uniform(-bound, bound, (fan_in, fan_out)))
        if bias:
            self.add(f"{name}.b", np.zeros(fan_out))

    def embedding(self, name: str, rows: int, width: int, std: float) -> None:
        self.add(name, self.rng.normal(0.0, std, (rows, width)))

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def state_dict(self) -> dict:
        return {k: v.data.copy() for k, v in self._params.items()}

    def load_state_dict(self, tensors: dict) -> None:
        missing = set(self._params) - set(tensors)
        extra = set(tensors) - set(self._params)
        if missing or extra:
            raise KeyError(f"parameter mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, v in tensors.items():
            self.set(k, v)

    def astype(self, dtype) -> None:
        for t in self._params.values():
            t.data = t.data.astype(dtype)

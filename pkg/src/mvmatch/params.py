"""Named parameter registry shared by every module of a model."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from .autodiff import Node, leaf


class ParamStore:
    """Ordered name -> Node map; each name can be registered once."""

    def __init__(self, seed: int = 0, dtype=np.float64, init_scale: float = 0.08):
        self.rng = np.random.default_rng(seed)
        self.dtype = np.dtype(dtype)
        self.init_scale = init_scale
        self._params: dict[str, Node] = {}

    def add(self, name: str, value) -> Node:
        if name in self._params:
            raise KeyError(f"parameter {name!r} registered twice")
        node = leaf(np.asarray(value, dtype=self.dtype), requires_grad=True, name=name)
        self._params[name] = node
        return node

    def uniform(self, name: str, shape: tuple[int, ...], scale: float | None = None) -> Node:
        s = self.init_scale if scale is None else scale
        return self.add(name, self.rng.uniform(-s, s, size=shape))

    def zeros(self, name: str, shape: tuple[int, ...]) -> Node:
        return self.add(name, np.zeros(shape))

    def __getitem__(self, name: str) -> Node:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def as_dict(self) -> dict[str, Node]:
        return dict(self._params)

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.value.copy() for k, v in self._params.items()}

    def restore(self, values: dict[str, np.ndarray]) -> None:
        for k, v in values.items():
            self._params[k].value[...] = v

    def count(self) -> int:
        return sum(p.value.size for p in self._params.values())

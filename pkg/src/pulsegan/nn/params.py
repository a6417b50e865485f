from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class Param:
    """A learnable array with its gradient and Adam moment buffers."""

    name: str
    value: np.ndarray
    grad: np.ndarray = field(default=None)
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)
    step: int = 0

    def __post_init__(self):
        self.value = np.ascontiguousarray(self.value, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.m is None:
            self.m = np.zeros_like(self.value)
        if self.v is None:
            self.v = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0


class ParamStore:
    """Named parameters plus non-learnable buffers (e.g. running statistics)."""

    def __init__(self):
        self.params: "OrderedDict[str, Param]" = OrderedDict()
        self.buffers: "OrderedDict[str, np.ndarray]" = OrderedDict()

    def add(self, name, value):
        if name in self.params or name in self.buffers:
            raise KeyError(f"duplicate parameter name {name!r}")
        p = Param(name, value)
        self.params[name] = p
        return p

    def add_buffer(self, name, value):
        if name in self.params or name in self.buffers:
            raise KeyError(f"duplicate parameter name {name!r}")
        self.buffers[name] = np.ascontiguousarray(value, dtype=np.float64)
        return self.buffers[name]

    def __getitem__(self, name):
        return self.params[name]

    def __iter__(self):
        return iter(self.params.values())

    def __len__(self):
        return len(self.params)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def num_values(self):
        return sum(p.value.size for p in self.params.values())

    def snapshot(self):
        """Deep copy of every array, for bit-identity comparisons."""
        snap = {}
        for p in self.params.values():
            snap[p.name] = (p.value.copy(), p.m.copy(), p.v.copy(), p.step)
        for k, b in self.buffers.items():
            snap[k] = b.copy()
        return snap

"""Finite-difference gradient suite over every layer and both composed networks."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .models import Discriminator, Generator, NetPlan
from .nn import (
    BatchNorm1d,
    Conv1d,
    ConvTranspose1d,
    LeakyReLU,
    Linear,
    ParamStore,
    PReLU,
    Sigmoid,
    Tanh,
    concat_channels,
    grad_check,
    split_channels,
)

# Reduced layer plan so the composed networks can be probed exhaustively.
SMALL_PLAN = NetPlan(window_len=60, padded_len=64, kernel=5,
                     enc_channels=(2, 3, 3, 4, 4, 5), disc_channels=(2, 3, 3, 4, 4, 5))


def _kinks(layers):
    parts = [(l._x > 0).ravel() for l in layers if isinstance(l, (PReLU, LeakyReLU))]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=bool)


class Stack:
    """Layers applied in sequence."""

    def __init__(self, store, *layers):
        self.store = store
        self.layers = layers

    def forward(self, x):
        for l in self.layers:
            x = l.forward(x)
        return x

    def backward(self, g):
        for l in reversed(self.layers):
            g = l.backward(g)
        return g

    def params(self):
        return list(self.store)

    def kink_state(self):
        return _kinks(self.layers)


class ConcatFragment:
    """Two convolution branches joined by channel concatenation, then a third."""

    def __init__(self, store, a, b, head):
        self.store, self.a, self.b, self.head = store, a, b, head
        self._first = None

    def forward(self, x):
        ya = self.a.forward(x)
        self._first = ya.shape[1]
        return self.head.forward(concat_channels(ya, self.b.forward(x)))

    def backward(self, g):
        ga, gb = split_channels(self.head.backward(g), self._first)
        return self.a.backward(ga) + self.b.backward(gb)

    def params(self):
        return list(self.store)


class GeneratorFragment:
    def __init__(self, gen):
        self.gen = gen

    def forward(self, x):
        return self.gen.forward(x)

    def backward(self, g):
        return self.gen.backward(g)

    def params(self):
        return self.gen.params()

    def kink_state(self):
        return self.gen.kink_state()


class DiscriminatorFragment:
    """Input (B, 2, L) holds (candidate, condition); output (B, 1)."""

    def __init__(self, disc):
        self.disc = disc

    def forward(self, x):
        return self.disc.forward(x[:, 0], x[:, 1])[:, None]

    def backward(self, g):
        gc, gx = self.disc.backward(g[:, 0])
        return np.stack([gc, gx], axis=1)

    def params(self):
        return self.disc.params()

    def kink_state(self):
        return self.disc.kink_state()


def _dims(rng):
    return int(rng.integers(2, 4)), int(rng.integers(1, 4)), int(rng.integers(8, 17))


def _conv_case(rng):
    b, c, n = _dims(rng)
    k = int(rng.choice([1, 3, 5]))
    store = ParamStore()
    layer = Conv1d(store, "conv", c, int(rng.integers(1, 4)), k, int(rng.integers(1, 3)),
                   int(rng.integers(0, k // 2 + 1)), rng)
    layer.b.value[:] = rng.normal(size=layer.b.value.shape)
    return Stack(store, layer), rng.normal(size=(b, c, n))


def _tconv_case(rng):
    b, c, n = _dims(rng)
    k = int(rng.choice([1, 3, 5]))
    stride = int(rng.integers(1, 3))
    store = ParamStore()
    pad = int(rng.integers(0, k // 2 + 1))
    layer = ConvTranspose1d(store, "tconv", c, int(rng.integers(1, 4)), k, stride, pad,
                            int(rng.integers(0, min(stride - 1, pad) + 1)), rng)
    layer.b.value[:] = rng.normal(size=layer.b.value.shape)
    return Stack(store, layer), rng.normal(size=(b, c, n))


def _act_case(kind):
    def build(rng):
        b, c, n = _dims(rng)
        store = ParamStore()
        if kind == "prelu":
            layer = PReLU(store, "act", float(rng.uniform(0.05, 0.5)))
        elif kind == "leaky_relu":
            layer = LeakyReLU(0.2)
        elif kind == "tanh":
            layer = Tanh()
        else:
            layer = Sigmoid()
        return Stack(store, layer), rng.normal(size=(b, c, n))
    return build


def _bn_case(training):
    def build(rng):
        b, c, n = _dims(rng)
        store = ParamStore()
        bn = BatchNorm1d(store, "bn", c)
        bn.gamma.value[:] = rng.uniform(0.5, 1.5, c)
        bn.beta.value[:] = rng.normal(size=c)
        if not training:
            bn.running_mean[:] = rng.normal(size=c)
            bn.running_var[:] = rng.uniform(0.5, 2.0, c)
        bn.training = training
        return Stack(store, bn), rng.normal(1.0, 2.0, size=(b, c, n))
    return build


def _linear_case(rng):
    b = int(rng.integers(2, 5))
    fin, fout = int(rng.integers(1, 9)), int(rng.integers(1, 5))
    store = ParamStore()
    return Stack(store, Linear(store, "fc", fin, fout, rng)), rng.normal(size=(b, fin))


def _concat_case(rng):
    b, c, n = _dims(rng)
    store = ParamStore()
    ca, cb = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    a = Conv1d(store, "a", c, ca, 3, 1, 1, rng)
    bb = Conv1d(store, "b", c, cb, 3, 1, 1, rng)
    head = Conv1d(store, "head", ca + cb, 2, 3, 1, 1, rng)
    return ConcatFragment(store, a, bb, head), rng.normal(size=(b, c, n))


def _stack_case(rng):
    b, c, n = _dims(rng)
    store = ParamStore()
    mid = int(rng.integers(1, 4))
    layers = (Conv1d(store, "c1", c, mid, 5, 2, 2, rng), PReLU(store, "p1"),
              Conv1d(store, "c2", mid, 2, 3, 1, 1, rng), PReLU(store, "p2"))
    return Stack(store, *layers), rng.normal(size=(b, c, n))


def _generator_case(rng):
    gen = Generator(SMALL_PLAN, seed=int(rng.integers(2 ** 31)))
    for p in gen.params():
        if p.name.endswith(".bias"):
            p.value[:] = rng.normal(0.0, 0.1, p.value.shape)
    return GeneratorFragment(gen), rng.uniform(-1, 1, (2, SMALL_PLAN.window_len))


def _discriminator_case(rng):
    disc = Discriminator(SMALL_PLAN, seed=int(rng.integers(2 ** 31)))
    return DiscriminatorFragment(disc), rng.uniform(-1, 1, (3, 2, SMALL_PLAN.window_len))


CASES = {
    "conv1d": _conv_case,
    "tconv1d": _tconv_case,
    "prelu": _act_case("prelu"),
    "leaky_relu": _act_case("leaky_relu"),
    "tanh": _act_case("tanh"),
    "sigmoid": _act_case("sigmoid"),
    "batchnorm_train": _bn_case(True),
    "batchnorm_eval": _bn_case(False),
    "linear": _linear_case,
    "concat": _concat_case,
    "conv_prelu_stack": _stack_case,
    "generator": _generator_case,
    "discriminator": _discriminator_case,
}


@dataclass(frozen=True)
class CaseResult:
    case: str
    seed: int
    max_rel_error: float
    checked: int
    skipped: int
    passed: bool


def run_suite(seeds=20, tolerance=1e-4, h=1e-5, cases=None, base_seed=0):
    """Run every case over ``seeds`` seeded configurations.

    Returns (results, elapsed seconds). ``cases`` restricts to a subset of
    :data:`CASES` names.
    """
    names = list(cases) if cases is not None else list(CASES)
    unknown = [n for n in names if n not in CASES]
    if unknown:
        raise ValueError(f"unknown gradient cases {unknown}")
    t0 = time.process_time()
    out = []
    for name in names:
        for s in range(seeds):
            rng = np.random.default_rng([base_seed, s, names.index(name)])
            frag, x = CASES[name](rng)
            rep = grad_check(frag, x, h=h, seed=s)
            out.append(CaseResult(name, s, rep.max_rel_error, rep.checked, rep.skipped,
                                  rep.passed(tolerance)))
    return out, time.process_time() - t0

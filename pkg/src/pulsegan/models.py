"""Generator (encoder-decoder with skips) and conditional discriminator."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ShapeError
from .nn import (
    BatchNorm1d,
    Conv1d,
    ConvTranspose1d,
    LeakyReLU,
    Linear,
    ParamStore,
    PReLU,
    Tanh,
    concat_channels,
    split_channels,
)


@dataclass(frozen=True)
class NetPlan:
    """Layer plan shared by both networks.

    ``window_len`` samples are zero-padded (in the [-1, 1] domain) to
    ``padded_len`` so every stride halving is exact, then cropped back.
    """

    window_len: int = 300
    padded_len: int = 320
    kernel: int = 31
    stride: int = 2
    enc_channels: tuple = (16, 32, 32, 64, 64, 128)
    disc_channels: tuple = (16, 32, 32, 64, 64, 128)
    prelu_init: float = 0.25
    leaky_slope: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "enc_channels", tuple(int(c) for c in self.enc_channels))
        object.__setattr__(self, "disc_channels", tuple(int(c) for c in self.disc_channels))
        if self.kernel % 2 != 1:
            raise ValueError("kernel width must be odd")
        if self.padded_len < self.window_len:
            raise ValueError("padded_len must be >= window_len")
        for chans in (self.enc_channels, self.disc_channels):
            if self.padded_len % self.stride ** len(chans):
                raise ValueError(
                    f"padded_len {self.padded_len} is not divisible by stride^{len(chans)}"
                )

    @property
    def pad_left(self):
        return (self.padded_len - self.window_len) // 2

    @property
    def conv_pad(self):
        return (self.kernel - 1) // 2

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("enc_channels", "disc_channels"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


def to_pm1(x01):
    return 2.0 * np.asarray(x01, dtype=np.float64) - 1.0


def to_01(xpm1):
    return (np.asarray(xpm1, dtype=np.float64) + 1.0) / 2.0


def _pad(plan, x):
    """(B, window_len) -> (B, 1, padded_len)."""
    left = plan.pad_left
    right = plan.padded_len - plan.window_len - left
    return np.pad(x, ((0, 0), (left, right)))[:, None, :]


def _check_batch(plan, x, what):
    if x.ndim != 2 or x.shape[1] != plan.window_len:
        raise ShapeError(f"{what}: expected (batch, {plan.window_len}) windows, got {x.shape}")


class Generator:
    """Six strided convolutions down, six transposed convolutions up.

    Encoder stage i feeds decoder stage n+1-i by channel concatenation; the
    innermost encoder output is the first decoder stage's only input. PReLU
    everywhere except the final Tanh. No latent noise input: the mapping is
    fully deterministic.
    """

    def __init__(self, plan: NetPlan = NetPlan(), seed=0):
        self.plan = plan
        self.store = ParamStore()
        rng = np.random.default_rng(seed)
        k, s, p = plan.kernel, plan.stride, plan.conv_pad
        enc = plan.enc_channels
        n = len(enc)
        self.enc, self.enc_act = [], []
        cin = 1
        for i, c in enumerate(enc, 1):
            self.enc.append(Conv1d(self.store, f"gen.enc{i}", cin, c, k, s, p, rng, plan.prelu_init))
            self.enc_act.append(PReLU(self.store, f"gen.enc{i}.act", plan.prelu_init))
            cin = c
        outs = list(enc[:-1][::-1]) + [1]
        self.dec, self.dec_act = [], []
        for j, c in enumerate(outs, 1):
            cin = enc[-1] if j == 1 else outs[j - 2] + enc[n - j]
            self.dec.append(ConvTranspose1d(self.store, f"gen.dec{j}", cin, c, k, s, p, s - 1, rng,
                                            plan.prelu_init))
            if j < n:
                self.dec_act.append(PReLU(self.store, f"gen.dec{j}.act", plan.prelu_init))
            else:
                self.dec_act.append(Tanh())
        self._split = None

    def params(self):
        return list(self.store)

    def forward(self, x):
        """(B, window_len) in [-1, 1] -> (B, window_len) in [-1, 1]."""
        _check_batch(self.plan, x, "Generator")
        h = _pad(self.plan, x)
        skips = []
        for conv, act in zip(self.enc, self.enc_act):
            h = act.forward(conv.forward(h))
            skips.append(h)
        n = len(self.enc)
        self._split = []
        for j, (deconv, act) in enumerate(zip(self.dec, self.dec_act), 1):
            if j > 1:
                skip = skips[n - j]
                self._split.append(h.shape[1])
                h = concat_channels(h, skip)
            h = act.forward(deconv.forward(h))
        left = self.plan.pad_left
        return h[:, 0, left:left + self.plan.window_len]

    def backward(self, gy):
        plan = self.plan
        g = np.zeros((gy.shape[0], 1, plan.padded_len))
        g[:, 0, plan.pad_left:plan.pad_left + plan.window_len] = gy
        n = len(self.enc)
        skip_grads = [None] * n
        for j in range(n, 0, -1):
            g = self.dec[j - 1].backward(self.dec_act[j - 1].backward(g))
            if j > 1:
                g, gskip = split_channels(g, self._split[j - 2])
                skip_grads[n - j] = gskip
        for i in range(n - 1, -1, -1):
            if skip_grads[i] is not None:
                g = g + skip_grads[i]
            g = self.enc[i].backward(self.enc_act[i].backward(g))
        left = plan.pad_left
        return g[:, 0, left:left + plan.window_len]

    def kink_state(self):
        """Sign pattern of every PReLU input from the last forward."""
        return np.concatenate([(a._x > 0).ravel() for a in self.enc_act + self.dec_act
                               if isinstance(a, PReLU)])

    def denoise(self, x01, batch_size=64):
        """Apply to [0, 1]-normalized windows; returns [0, 1]-domain output."""
        x01 = np.atleast_2d(np.asarray(x01, dtype=np.float64))
        out = [self.forward(to_pm1(x01[i:i + batch_size])) for i in range(0, len(x01), batch_size)]
        return to_01(np.concatenate(out, axis=0))


class Discriminator:
    """Strided conv + batch norm + LeakyReLU stages, then one linear unit.

    The convolutions carry no bias: the batch-norm shift plays that role.

    Input channels are (candidate, condition). The score is unbounded.
    """

    def __init__(self, plan: NetPlan = NetPlan(), seed=1, zero_head=False):
        self.plan = plan
        self.store = ParamStore()
        rng = np.random.default_rng(seed)
        k, s, p = plan.kernel, plan.stride, plan.conv_pad
        self.convs, self.norms, self.acts = [], [], []
        cin = 2
        for i, c in enumerate(plan.disc_channels, 1):
            self.convs.append(Conv1d(self.store, f"disc.conv{i}", cin, c, k, s, p, rng,
                                     plan.leaky_slope, bias=False))
            self.norms.append(BatchNorm1d(self.store, f"disc.bn{i}", c))
            self.acts.append(LeakyReLU(plan.leaky_slope))
            cin = c
        self.out_len = plan.padded_len // s ** len(plan.disc_channels)
        self.head = Linear(self.store, "disc.fc", cin * self.out_len, 1, rng, zero_init=zero_head)
        self._flat_shape = None

    def params(self):
        return list(self.store)

    def train(self):
        for bn in self.norms:
            bn.training = True

    def eval(self):
        for bn in self.norms:
            bn.training = False

    def kink_state(self):
        return np.concatenate([(a._x > 0).ravel() for a in self.acts])

    def forward(self, candidate, condition):
        """Both (B, window_len) in [-1, 1] -> scores (B,)."""
        _check_batch(self.plan, candidate, "Discriminator candidate")
        _check_batch(self.plan, condition, "Discriminator condition")
        if candidate.shape != condition.shape:
            raise ShapeError("candidate and condition must have equal shapes")
        h = np.concatenate([_pad(self.plan, candidate), _pad(self.plan, condition)], axis=1)
        for conv, bn, act in zip(self.convs, self.norms, self.acts):
            h = act.forward(bn.forward(conv.forward(h)))
        self._flat_shape = h.shape
        return self.head.forward(h.reshape(h.shape[0], -1))[:, 0]

    def backward(self, gscore):
        """Returns gradients for (candidate, condition)."""
        g = self.head.backward(np.asarray(gscore, dtype=np.float64)[:, None])
        g = g.reshape(self._flat_shape)
        for conv, bn, act in zip(self.convs[::-1], self.norms[::-1], self.acts[::-1]):
            g = conv.backward(bn.backward(act.backward(g)))
        left, w = self.plan.pad_left, self.plan.window_len
        return g[:, 0, left:left + w], g[:, 1, left:left + w]

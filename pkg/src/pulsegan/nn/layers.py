"""1D layers with hand-written backward passes.

Activations are float64 arrays shaped ``(batch, channels, length)``. Each
layer caches what its backward pass needs during ``forward``; ``backward``
takes the gradient of the output, accumulates parameter gradients into the
owning :class:`~pulsegan.nn.params.Param` objects and returns the gradient of
the input. A forward must be followed by its own backward before the layer
is reused.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError


def conv_out_len(length, kernel, stride, pad):
    return (length + 2 * pad - kernel) // stride + 1


def tconv_out_len(length, kernel, stride, pad, output_padding=0):
    return (length - 1) * stride - 2 * pad + kernel + output_padding


def _check3(x, channels, what):
    if x.ndim != 3:
        raise ShapeError(f"{what}: expected (batch, channels, length), got shape {x.shape}")
    if x.shape[1] != channels:
        raise ShapeError(f"{what}: expected {channels} input channels, got {x.shape[1]}")


# -- functional cores -------------------------------------------------------

def conv1d_forward(x, w, b, stride=1, pad=0):
    """Cross-correlation. ``w`` is (out, in, kernel). Returns (y, cache)."""
    bsz, cin, length = x.shape
    cout, cin_w, k = w.shape
    if cin != cin_w:
        raise ShapeError(f"conv1d: input has {cin} channels, weights expect {cin_w}")
    lout = conv_out_len(length, k, stride, pad)
    if lout < 1:
        raise ShapeError(f"conv1d: non-positive output length for L={length}, K={k}, pad={pad}")
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad))) if pad else x
    win = sliding_window_view(xp, k, axis=2)[:, :, ::stride, :][:, :, :lout, :]
    cols = win.transpose(0, 2, 1, 3).reshape(bsz * lout, cin * k)
    y = cols @ w.reshape(cout, cin * k).T
    if b is not None:
        y += b
    y = y.reshape(bsz, lout, cout).transpose(0, 2, 1)
    return np.ascontiguousarray(y), (cols, xp.shape, stride, pad, lout)


def conv1d_backward(gy, w, cache):
    """Returns (gx, gw, gb)."""
    cols, xshape, stride, pad, lout = cache
    bsz, cin, lp = xshape
    cout, _, k = w.shape
    go = gy.transpose(0, 2, 1).reshape(bsz * lout, cout)
    gw = (go.T @ cols).reshape(w.shape)
    gb = go.sum(axis=0)
    dcols = (go @ w.reshape(cout, cin * k)).reshape(bsz, lout, cin, k).transpose(0, 2, 3, 1)
    gxp = np.zeros(xshape)
    span = stride * (lout - 1) + 1
    for j in range(k):
        gxp[:, :, j:j + span:stride] += dcols[:, :, j, :]
    gx = gxp[:, :, pad:lp - pad] if pad else gxp
    return np.ascontiguousarray(gx), gw, gb


def tconv1d_forward(x, w, b, stride=1, pad=0, output_padding=0):
    """Transposed convolution. ``w`` is (in, out, kernel). Returns (y, cache)."""
    bsz, cin, length = x.shape
    cin_w, cout, k = w.shape
    if cin != cin_w:
        raise ShapeError(f"tconv1d: input has {cin} channels, weights expect {cin_w}")
    if output_padding > pad:
        raise ShapeError("tconv1d: output_padding may not exceed padding")
    lout = tconv_out_len(length, k, stride, pad, output_padding)
    if lout < 1:
        raise ShapeError("tconv1d: non-positive output length")
    lfull = (length - 1) * stride + k
    xc = x.transpose(0, 2, 1).reshape(bsz * length, cin)
    cols = (xc @ w.reshape(cin, cout * k)).reshape(bsz, length, cout, k).transpose(0, 2, 3, 1)
    full = np.zeros((bsz, cout, lfull))
    span = stride * (length - 1) + 1
    for j in range(k):
        full[:, :, j:j + span:stride] += cols[:, :, j, :]
    y = full[:, :, pad:pad + lout]
    if b is not None:
        y = y + b[None, :, None]
    return np.ascontiguousarray(y), (xc, x.shape, lfull, stride, pad, lout)


def tconv1d_backward(gy, w, cache):
    xc, xshape, lfull, stride, pad, lout = cache
    bsz, cin, length = xshape
    _, cout, k = w.shape
    gfull = np.zeros((bsz, cout, lfull))
    gfull[:, :, pad:pad + lout] = gy
    win = sliding_window_view(gfull, k, axis=2)[:, :, ::stride, :][:, :, :length, :]
    gcols = win.transpose(0, 2, 1, 3).reshape(bsz * length, cout * k)
    wm = w.reshape(cin, cout * k)
    gx = (gcols @ wm.T).reshape(bsz, length, cin).transpose(0, 2, 1)
    gw = (xc.T @ gcols).reshape(w.shape)
    gb = gy.sum(axis=(0, 2))
    return np.ascontiguousarray(gx), gw, gb


# -- layers -----------------------------------------------------------------

class Layer:
    def params(self):
        return []

    def __call__(self, x):
        return self.forward(x)


def kaiming_std(fan_in, slope=0.0):
    return np.sqrt(2.0 / ((1.0 + slope ** 2) * fan_in))


class Conv1d(Layer):
    def __init__(self, store, name, cin, cout, kernel, stride=1, pad=0, rng=None, slope=0.25,
                 bias=True):
        rng = rng if rng is not None else np.random.default_rng(0)
        std = kaiming_std(cin * kernel, slope)
        self.w = store.add(f"{name}.weight", rng.normal(0.0, std, (cout, cin, kernel)))
        # a bias directly followed by batch norm is cancelled by it; omit it there
        self.b = store.add(f"{name}.bias", np.zeros(cout)) if bias else None
        self.cin, self.cout, self.kernel = cin, cout, kernel
        self.stride, self.pad = stride, pad
        self._cache = None

    def params(self):
        return [self.w] if self.b is None else [self.w, self.b]

    def forward(self, x):
        _check3(x, self.cin, "Conv1d")
        b = np.zeros(self.cout) if self.b is None else self.b.value
        y, self._cache = conv1d_forward(x, self.w.value, b, self.stride, self.pad)
        return y

    def backward(self, gy):
        gx, gw, gb = conv1d_backward(gy, self.w.value, self._cache)
        self.w.grad += gw
        if self.b is not None:
            self.b.grad += gb
        return gx


class ConvTranspose1d(Layer):
    def __init__(self, store, name, cin, cout, kernel, stride=1, pad=0, output_padding=0,
                 rng=None, slope=0.25):
        rng = rng if rng is not None else np.random.default_rng(0)
        std = kaiming_std(cin * kernel / stride, slope)
        self.w = store.add(f"{name}.weight", rng.normal(0.0, std, (cin, cout, kernel)))
        self.b = store.add(f"{name}.bias", np.zeros(cout))
        self.cin, self.cout, self.kernel = cin, cout, kernel
        self.stride, self.pad, self.output_padding = stride, pad, output_padding
        self._cache = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x):
        _check3(x, self.cin, "ConvTranspose1d")
        y, self._cache = tconv1d_forward(x, self.w.value, self.b.value, self.stride, self.pad,
                                         self.output_padding)
        return y

    def backward(self, gy):
        gx, gw, gb = tconv1d_backward(gy, self.w.value, self._cache)
        self.w.grad += gw
        self.b.grad += gb
        return gx


class PReLU(Layer):
    """Leaky rectifier whose negative-side slope is a learnable scalar."""

    def __init__(self, store, name, init=0.25):
        self.a = store.add(f"{name}.slope", np.array([init]))
        self._x = None

    def params(self):
        return [self.a]

    def forward(self, x):
        self._x = x
        return np.where(x > 0, x, self.a.value[0] * x)

    def backward(self, gy):
        x = self._x
        neg = x <= 0
        self.a.grad[0] += np.sum(gy * x * neg)
        return np.where(neg, self.a.value[0] * gy, gy)


class LeakyReLU(Layer):
    def __init__(self, slope=0.2):
        self.slope = slope
        self._x = None

    def forward(self, x):
        self._x = x
        return np.where(x > 0, x, self.slope * x)

    def backward(self, gy):
        return np.where(self._x > 0, gy, self.slope * gy)


class Tanh(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x):
        self._y = np.tanh(x)
        return self._y

    def backward(self, gy):
        return gy * (1.0 - self._y ** 2)


class Sigmoid(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x):
        # split by sign to avoid overflow in exp
        y = np.empty_like(x, dtype=np.float64)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        self._y = y
        return y

    def backward(self, gy):
        return gy * self._y * (1.0 - self._y)


def activation(kind, store=None, name=None, **kw):
    """Build an activation layer by name: prelu, tanh, leaky_relu, sigmoid."""
    if kind == "prelu":
        return PReLU(store, name, kw.get("init", 0.25))
    if kind == "tanh":
        return Tanh()
    if kind == "leaky_relu":
        return LeakyReLU(kw.get("slope", 0.2))
    if kind == "sigmoid":
        return Sigmoid()
    raise ValueError(f"unknown activation {kind!r}")


class BatchNorm1d(Layer):
    """Per-channel normalization over (batch, length).

    Train mode uses batch statistics and updates the running estimates
    (``running = (1-momentum)*running + momentum*batch``, unbiased variance);
    eval mode uses the running estimates.
    """

    def __init__(self, store, name, channels, momentum=0.1, eps=1e-5):
        if not eps > 0:
            raise ValueError("eps must be positive")
        self.gamma = store.add(f"{name}.scale", np.ones(channels))
        self.beta = store.add(f"{name}.shift", np.zeros(channels))
        self.running_mean = store.add_buffer(f"{name}.running_mean", np.zeros(channels))
        self.running_var = store.add_buffer(f"{name}.running_var", np.ones(channels))
        self.channels, self.momentum, self.eps = channels, momentum, eps
        self.training = True
        self._cache = None

    def params(self):
        return [self.gamma, self.beta]

    def forward(self, x):
        _check3(x, self.channels, "BatchNorm1d")
        if self.training:
            n = x.shape[0] * x.shape[2]
            if n < 2:
                raise ShapeError("BatchNorm1d: train mode needs more than one value per channel")
            mean = x.mean(axis=(0, 2))
            var = x.var(axis=(0, 2))
            # in-place so the store keeps referencing the same arrays
            self.running_mean *= 1.0 - self.momentum
            self.running_mean += self.momentum * mean
            self.running_var *= 1.0 - self.momentum
            self.running_var += self.momentum * var * n / (n - 1)
        else:
            mean, var = self.running_mean, self.running_var
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None]) * inv[None, :, None]
        self._cache = (xhat, inv, self.training)
        return self.gamma.value[None, :, None] * xhat + self.beta.value[None, :, None]

    def backward(self, gy):
        xhat, inv, training = self._cache
        self.gamma.grad += np.sum(gy * xhat, axis=(0, 2))
        self.beta.grad += np.sum(gy, axis=(0, 2))
        gxhat = gy * self.gamma.value[None, :, None]
        if not training:
            return gxhat * inv[None, :, None]
        n = gy.shape[0] * gy.shape[2]
        s1 = gxhat.sum(axis=(0, 2), keepdims=True)
        s2 = np.sum(gxhat * xhat, axis=(0, 2), keepdims=True)
        return (inv[None, :, None] / n) * (n * gxhat - s1 - xhat * s2)


class Linear(Layer):
    """Affine map on (batch, features)."""

    def __init__(self, store, name, fin, fout, rng=None, zero_init=False):
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = 1.0 / np.sqrt(fin)
        if zero_init:
            w, b = np.zeros((fout, fin)), np.zeros(fout)
        else:
            w = rng.uniform(-bound, bound, (fout, fin))
            b = rng.uniform(-bound, bound, fout)
        self.w = store.add(f"{name}.weight", w)
        self.b = store.add(f"{name}.bias", b)
        self.fin, self.fout = fin, fout
        self._x = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.fin:
            raise ShapeError(f"Linear: expected (batch, {self.fin}), got {x.shape}")
        self._x = x
        return x @ self.w.value.T + self.b.value

    def backward(self, gy):
        self.w.grad += gy.T @ self._x
        self.b.grad += gy.sum(axis=0)
        return gy @ self.w.value


def concat_channels(a, b):
    if a.ndim != 3 or b.ndim != 3 or a.shape[0] != b.shape[0] or a.shape[2] != b.shape[2]:
        raise ShapeError(f"concat_channels: incompatible shapes {a.shape} and {b.shape}")
    return np.concatenate([a, b], axis=1)


def split_channels(g, first):
    """Backward of :func:`concat_channels`: route gradient slices to the sources."""
    return g[:, :first], g[:, first:]

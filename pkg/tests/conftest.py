import numpy as np
import pytest

from pulsegan.dsp import SampledSignal
from pulsegan.models import NetPlan

# Small layer plan used wherever full-size networks would be too slow.
TINY_PLAN = NetPlan(window_len=60, padded_len=64, kernel=5,
                    enc_channels=(2, 3, 3, 4, 4, 5), disc_channels=(2, 3, 3, 4, 4, 5))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_plan():
    return TINY_PLAN


def tone(freq_hz, seconds=10.0, rate=30.0, amp=1.0, phase=0.0):
    t = np.arange(int(round(seconds * rate))) / rate
    return SampledSignal(amp * np.sin(2 * np.pi * freq_hz * t + phase), rate)


def naive_dft_magnitude(x, n=1024):
    """O(n^2) one-sided DFT magnitude, independent of numpy.fft."""
    x = np.concatenate([np.asarray(x, dtype=np.float64), np.zeros(n - len(x))])
    k = np.arange(n // 2 + 1)[:, None]
    m = np.arange(n)[None, :]
    ang = -2.0 * np.pi * k * m / n
    re = (np.cos(ang) * x).sum(axis=1)
    im = (np.sin(ang) * x).sum(axis=1)
    return np.hypot(re, im)


class Pairs:
    """Minimal stand-in for a window set: ``rough`` and ``ref`` in [0, 1]."""

    def __init__(self, rough, ref):
        self.rough, self.ref = rough, ref


def toy_pairs(n, width=60, seed=0):
    """Noisy sinusoid windows paired with their clean versions."""
    rng = np.random.default_rng(seed)
    t = np.arange(width) / 30.0
    f = rng.uniform(1.0, 2.0, (n, 1))
    ph = rng.uniform(0, 2 * np.pi, (n, 1))
    clean = 0.5 + 0.4 * np.sin(2 * np.pi * f * t + ph)
    noisy = np.clip(clean + rng.normal(0, 0.15, clean.shape), 0, 1)
    return Pairs(noisy, clean)

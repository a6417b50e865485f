"""Deterministic 1D signal primitives.

Every routine here is a pure function of its inputs. Signals travel as
:class:`SampledSignal` (values plus sampling rate); all arithmetic is
float64.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import DegenerateInputError, ShapeError, SignalTooShortError

NFFT = 1024
DEFAULT_BAND = (0.7, 4.0)
DEFAULT_DETREND_SEC = 1.0
BANDPASS_ORDER = 4


@dataclass(frozen=True, eq=False)
class SampledSignal:
    values: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise ShapeError("signal must be a non-empty 1D sequence")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal contains non-finite values")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self):
        return self.values.size

    @property
    def duration_sec(self):
        return len(self) / self.sample_rate_hz

    @property
    def times(self):
        return np.arange(len(self)) / self.sample_rate_hz

    def with_values(self, values):
        return SampledSignal(values, self.sample_rate_hz)


@dataclass(frozen=True, eq=False)
class Spectrum1024:
    """One-sided magnitude spectrum of a 1024-point DFT (513 bins)."""

    magnitudes: np.ndarray
    bin_hz: float

    def __post_init__(self):
        m = np.asarray(self.magnitudes, dtype=np.float64)
        if m.shape != (NFFT // 2 + 1,):
            raise ShapeError(f"expected {NFFT // 2 + 1} bins, got {m.shape}")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("magnitudes must be finite and non-negative")
        object.__setattr__(self, "magnitudes", m)

    @property
    def frequencies(self):
        return np.arange(self.magnitudes.size) * self.bin_hz


def _odd_window(window_sec, rate):
    half = int(round(window_sec * rate / 2.0))
    return max(half, 0)


def moving_average(values, half):
    """Centered moving average over ``2*half+1`` samples, truncated at edges."""
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    csum = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def detrend(s: SampledSignal, window_sec: float = DEFAULT_DETREND_SEC) -> SampledSignal:
    """Subtract the centered moving average.

    The window spans ``window_sec`` rounded to an odd number of samples;
    near the edges it shrinks symmetrically to what is available.
    """
    if not window_sec > 0:
        raise ValueError("window_sec must be positive")
    if len(s) <= window_sec * s.sample_rate_hz:
        raise SignalTooShortError(
            f"signal of {len(s)} samples is shorter than the {window_sec} s smoothing window"
        )
    half = _odd_window(window_sec, s.sample_rate_hz)
    # np.cumsum over a long signal accumulates rounding; subtract the mean
    # first so the residual of a constant stays exactly representable.
    centered = s.values - s.values.mean()
    return s.with_values(centered - moving_average(centered, half))


def normalize01(s: SampledSignal) -> SampledSignal:
    lo, hi = s.values.min(), s.values.max()
    if not hi > lo:
        raise DegenerateInputError("cannot normalize a constant signal")
    out = (s.values - lo) / (hi - lo)
    # exact bounds despite rounding in the division
    out[s.values == lo] = 0.0
    out[s.values == hi] = 1.0
    return s.with_values(out)


def butter_bandpass_sos(lo_hz, hi_hz, rate, order=BANDPASS_ORDER):
    if not 0 < lo_hz < hi_hz < rate / 2.0:
        raise ValueError(
            f"band edges must satisfy 0 < lo < hi < Nyquist ({rate / 2.0} Hz); got [{lo_hz}, {hi_hz}]"
        )
    return sps.butter(order, [lo_hz, hi_hz], btype="bandpass", fs=rate, output="sos")


def bandpass(s: SampledSignal, lo_hz: float = DEFAULT_BAND[0], hi_hz: float = DEFAULT_BAND[1],
             order: int = BANDPASS_ORDER) -> SampledSignal:
    """Zero-phase Butterworth band-pass (forward-backward)."""
    sos = butter_bandpass_sos(lo_hz, hi_hz, s.sample_rate_hz, order)
    return s.with_values(sps.sosfiltfilt(sos, s.values))


def resample_linear(s: SampledSignal, target_hz: float) -> SampledSignal:
    """Linear interpolation onto a uniform grid covering the same time span."""
    if not target_hz > 0:
        raise ValueError("target_hz must be positive")
    if target_hz == s.sample_rate_hz:
        return s.with_values(s.values.copy())
    span = (len(s) - 1) / s.sample_rate_hz
    m = int(np.floor(span * target_hz + 1e-9)) + 1
    t_new = np.arange(m) / target_hz
    return SampledSignal(np.interp(t_new, s.times, s.values), target_hz)


def rfft_magnitude(x, n=NFFT):
    """|rfft| along the last axis, zero-padded to ``n`` points."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] > n:
        raise ShapeError(f"input length {x.shape[-1]} exceeds the {n}-point transform")
    return np.abs(np.fft.rfft(x, n=n, axis=-1))


def spectrum1024(s: SampledSignal) -> Spectrum1024:
    return Spectrum1024(rfft_magnitude(s.values), s.sample_rate_hz / NFFT)


def full_spectrum_energy(magnitudes):
    """Sum of squared magnitudes over all 1024 bins, from the one-sided half."""
    m2 = np.asarray(magnitudes) ** 2
    return m2[0] + m2[-1] + 2.0 * m2[1:-1].sum()


def _samples(sec, rate, what):
    n = sec * rate
    k = int(round(n))
    if k < 1 or abs(n - k) > 1e-9 * max(1.0, abs(n)):
        raise ValueError(f"{what} of {sec} s at {rate} Hz is not a whole number of samples")
    return k


def window_starts(n, win, step):
    if n < win:
        raise SignalTooShortError(f"signal of {n} samples is shorter than one {win}-sample window")
    return np.arange((n - win) // step + 1) * step


def sliding_windows(s: SampledSignal, win_sec: float, step_sec: float) -> list[SampledSignal]:
    w = _samples(win_sec, s.sample_rate_hz, "window")
    st = _samples(step_sec, s.sample_rate_hz, "step")
    return [s.with_values(s.values[i:i + w]) for i in window_starts(len(s), w, st)]


def dominant_frequency(sp: Spectrum1024, lo_hz: float = DEFAULT_BAND[0],
                       hi_hz: float = DEFAULT_BAND[1]) -> float:
    """Frequency of the strongest bin within [lo_hz, hi_hz]; ties go low."""
    f = sp.frequencies
    nyq = f[-1]
    if lo_hz < 0 or hi_hz > nyq + 1e-12 or lo_hz > hi_hz:
        raise ValueError(f"band [{lo_hz}, {hi_hz}] outside [0, {nyq}] Hz")
    idx = np.flatnonzero((f >= lo_hz) & (f <= hi_hz))
    if idx.size == 0:
        raise ValueError(f"no spectral bins inside [{lo_hz}, {hi_hz}] Hz")
    return float(f[idx[np.argmax(sp.magnitudes[idx])]])

"""Peak detection, interbeat intervals, HR/HRV features and error statistics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from . import dsp
from .dsp import SampledSignal
from .errors import NoPeaksError, ShapeError

RR_MIN_MS = 250.0
RR_MAX_MS = 2000.0
PROMINENCE_FRACTION = 0.2


@dataclass(frozen=True, eq=False)
class IbiSequence:
    """Beat peaks and the intervals between them.

    ``rr_ms[i]`` spans ``peak_samples[i]`` to ``peak_samples[i+1]``.
    ``gated[i]`` marks intervals outside the physiologic range; those are
    excluded from :attr:`nn_ms` (and hence HR/AVNN/SDNN).
    """

    peak_samples: np.ndarray
    rr_ms: np.ndarray
    gated: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        peaks = np.asarray(self.peak_samples, dtype=np.int64)
        rr = np.asarray(self.rr_ms, dtype=np.float64)
        gated = np.asarray(self.gated, dtype=bool)
        if rr.size != max(peaks.size - 1, 0) or gated.shape != rr.shape:
            raise ShapeError("need exactly one interval (and gate flag) per pair of peaks")
        if np.any(np.diff(peaks) <= 0):
            raise ValueError("peak samples must be strictly increasing")
        if np.any(rr <= 0):
            raise ValueError("intervals must be positive")
        object.__setattr__(self, "peak_samples", peaks)
        object.__setattr__(self, "rr_ms", rr)
        object.__setattr__(self, "gated", gated)

    @property
    def peak_times_sec(self):
        return self.peak_samples / self.sample_rate_hz

    @property
    def nn_ms(self):
        return self.rr_ms[~self.gated]


def detect_peaks(pulse: SampledSignal, lo_hz=dsp.DEFAULT_BAND[0], hi_hz=dsp.DEFAULT_BAND[1],
                 prominence_fraction=PROMINENCE_FRACTION):
    """Local maxima separated by at least half a dominant period.

    The dominant frequency comes from the 1024-point spectrum of the
    mean-removed pulse (segments longer than 1024 samples use their
    first 1024). Peaks need prominence of at least ``prominence_fraction``
    of the signal range.
    """
    x = pulse.values
    head = x[: dsp.NFFT]
    f_dom = dsp.dominant_frequency(
        dsp.spectrum1024(pulse.with_values(head - head.mean())), lo_hz, hi_hz)
    distance = max(1, int(np.floor(0.5 / f_dom * pulse.sample_rate_hz)))
    rng = float(x.max() - x.min())
    if rng <= 0:
        raise NoPeaksError("flat signal has no peaks")
    peaks, _ = find_peaks(x, distance=distance, prominence=prominence_fraction * rng)
    if peaks.size == 0:
        raise NoPeaksError("no peaks found")
    return peaks


def ibi_from_peaks(peaks, sample_rate_hz, rr_min_ms=RR_MIN_MS, rr_max_ms=RR_MAX_MS) -> IbiSequence:
    peaks = np.asarray(peaks, dtype=np.int64)
    if peaks.size < 2:
        raise NoPeaksError("need at least two peaks for an interval")
    rr = 1000.0 * np.diff(peaks) / sample_rate_hz
    gated = (rr < rr_min_ms) | (rr > rr_max_ms)
    return IbiSequence(peaks, rr, gated, sample_rate_hz)


def hr_from_ibi(ibi: IbiSequence) -> float:
    nn = ibi.nn_ms
    if nn.size == 0:
        raise ValueError("no valid intervals")
    return 60.0 / (nn.mean() / 1000.0)


def hrv_features(ibi: IbiSequence):
    """(AVNN, SDNN) in ms; SDNN is the sample standard deviation (T-1)."""
    nn = ibi.nn_ms
    if nn.size < 2:
        raise ValueError("SDNN needs at least two valid intervals")
    avnn = nn.mean()
    sdnn = np.sqrt(np.sum((nn - avnn) ** 2) / (nn.size - 1))
    return float(avnn), float(sdnn)


def pad_ibi(ibi: IbiSequence, target_len: int):
    """Expand intervals to a per-sample sequence of length ``target_len``.

    Samples in ``[peak_i, peak_{i+1})`` take ``rr_ms[i]``. Gated intervals
    inherit the preceding valid value (the following one if none precede);
    samples before the first or after the last peak take the nearest
    interval's value.
    """
    if ibi.rr_ms.size == 0 or np.all(ibi.gated):
        raise ValueError("no valid intervals to pad")
    values = ibi.rr_ms.copy()
    valid = ~ibi.gated
    idx = np.where(valid, np.arange(values.size), -1)
    idx = np.maximum.accumulate(idx)
    first = np.flatnonzero(valid)[0]
    idx[idx < 0] = first
    values = values[idx]
    n = np.arange(target_len)
    # interval index for each sample, clipped to the outermost intervals
    k = np.searchsorted(ibi.peak_samples, n, side="right") - 1
    k = np.clip(k, 0, values.size - 1)
    return values[k]


def ibi_ae(pred: IbiSequence, ref: IbiSequence, target_len: int) -> float:
    """Mean absolute difference of the padded IBI sequences (ms)."""
    return float(np.mean(np.abs(pad_ibi(pred, target_len) - pad_ibi(ref, target_len))))


def ibi_errors(preds, refs, target_len):
    """Per-window IBI absolute errors and their mean."""
    if len(preds) != len(refs):
        raise ShapeError("prediction and reference lists differ in length")
    if len(preds) == 0:
        raise ValueError("no windows")
    ae = np.array([ibi_ae(p, r, target_len) for p, r in zip(preds, refs)])
    return ae, float(ae.mean())


@dataclass(frozen=True)
class HrErrors:
    mae: float
    rmse: float
    mer: float      # percent
    r: float        # nan when either side is constant


def pearson_r(a, b):
    a = np.asarray(a, dtype=np.float64) - np.mean(a)
    b = np.asarray(b, dtype=np.float64) - np.mean(b)
    den = np.sqrt(np.sum(a * a) * np.sum(b * b))
    if den == 0:
        return float("nan")
    return float(np.clip(np.sum(a * b) / den, -1.0, 1.0))


def hr_error_suite(pred_bpm, ref_bpm) -> HrErrors:
    pred = np.asarray(pred_bpm, dtype=np.float64)
    ref = np.asarray(ref_bpm, dtype=np.float64)
    if pred.shape != ref.shape or pred.ndim != 1:
        raise ShapeError("prediction and reference must be equal-length vectors")
    if pred.size < 1:
        raise ValueError("no values")
    if np.any(ref == 0):
        raise ValueError("zero reference heart rate; error rate undefined")
    d = pred - ref
    mae = float(np.mean(np.abs(d)))
    rmse = float(np.sqrt(np.mean(d * d)))
    mer = float(np.mean(np.abs(d) / np.abs(ref)) * 100.0)
    r = pearson_r(pred, ref) if pred.size >= 2 else float("nan")
    return HrErrors(mae, max(rmse, mae), mer, r)


@dataclass(frozen=True)
class BlandAltman:
    bias: float
    lower: float
    upper: float


def bland_altman(pred, ref, z=1.96) -> BlandAltman:
    """Bias and limits of agreement ``bias +- z * sd`` (sample sd)."""
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape or pred.ndim != 1:
        raise ShapeError("prediction and reference must be equal-length vectors")
    if pred.size < 2:
        raise ValueError("need at least two pairs")
    d = pred - ref
    bias = float(d.mean())
    sd = float(d.std(ddof=1))
    return BlandAltman(bias, bias - z * sd, bias + z * sd)

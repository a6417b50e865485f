"""Chrominance-based rough pulse extraction from spatially averaged RGB traces."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .dsp import SampledSignal
from .errors import DegenerateChrominanceError, DegenerateInputError, ShapeError

# (r, g, b) weights of the two chrominance axes
S1_COEFFS = (3.0, -2.0, 0.0)
S2_COEFFS = (1.5, 1.0, -1.5)


@dataclass(frozen=True, eq=False)
class RgbTrace:
    r: np.ndarray
    g: np.ndarray
    b: np.ndarray
    fps: float

    def __post_init__(self):
        chans = [np.asarray(c, dtype=np.float64) for c in (self.r, self.g, self.b)]
        if any(c.ndim != 1 for c in chans) or len({c.size for c in chans}) != 1:
            raise ShapeError("r, g, b must be 1D sequences of equal length")
        if chans[0].size < 2:
            raise ShapeError("an RGB trace needs at least two frames")
        for name, c in zip("rgb", chans):
            if not np.all(np.isfinite(c)):
                raise ValueError(f"channel {name} contains non-finite values")
            if np.any(c <= 0):
                raise ValueError(f"channel {name} has non-positive intensities")
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        for name, c in zip("rgb", chans):
            object.__setattr__(self, name, c)
        object.__setattr__(self, "fps", float(self.fps))

    def __len__(self):
        return self.r.size

    def scaled(self, k):
        return RgbTrace(self.r * k, self.g * k, self.b * k, self.fps)

    def slice(self, start, stop):
        return RgbTrace(self.r[start:stop], self.g[start:stop], self.b[start:stop], self.fps)


@dataclass(frozen=True, eq=False)
class ChromPair:
    s1: np.ndarray
    s2: np.ndarray

    def __post_init__(self):
        s1 = np.asarray(self.s1, dtype=np.float64)
        s2 = np.asarray(self.s2, dtype=np.float64)
        if s1.shape != s2.shape:
            raise ShapeError("s1 and s2 must have equal lengths")
        object.__setattr__(self, "s1", s1)
        object.__setattr__(self, "s2", s2)


def standardize_rgb(tr: RgbTrace):
    """Divide each channel by its own temporal mean."""
    out = []
    for name in "rgb":
        c = getattr(tr, name)
        mu = c.mean()
        if mu == 0:
            raise DegenerateInputError(f"channel {name} has zero temporal mean")
        out.append(c / mu)
    return tuple(out)


def chrom_project(rn, gn, bn, s1_coeffs=S1_COEFFS, s2_coeffs=S2_COEFFS) -> ChromPair:
    rn, gn, bn = (np.asarray(v, dtype=np.float64) for v in (rn, gn, bn))
    if not rn.shape == gn.shape == bn.shape:
        raise ShapeError("standardized channels must have equal lengths")
    s1 = s1_coeffs[0] * rn + s1_coeffs[1] * gn + s1_coeffs[2] * bn
    s2 = s2_coeffs[0] * rn + s2_coeffs[1] * gn + s2_coeffs[2] * bn
    return ChromPair(s1, s2)


def alpha_tune(p: ChromPair, sample_rate_hz: float = 30.0) -> SampledSignal:
    """Combine band-passed chrominance signals as ``s1 - alpha*s2``.

    ``alpha = std(s1) / std(s2)`` with population standard deviations.
    """
    sd2 = p.s2.std()
    if not sd2 > 1e-12:
        raise DegenerateChrominanceError("second chrominance signal has no variation")
    alpha = p.s1.std() / sd2
    return SampledSignal(p.s1 - alpha * p.s2, sample_rate_hz)


def chrom_pulse(tr: RgbTrace, lo_hz: float = dsp.DEFAULT_BAND[0], hi_hz: float = dsp.DEFAULT_BAND[1],
                detrend_sec: float = dsp.DEFAULT_DETREND_SEC, order: int = dsp.BANDPASS_ORDER,
                s1_coeffs=S1_COEFFS, s2_coeffs=S2_COEFFS) -> SampledSignal:
    """Rough pulse in [0, 1], one sample per input frame."""
    rn, gn, bn = standardize_rgb(tr)
    pair = chrom_project(rn, gn, bn, s1_coeffs, s2_coeffs)
    s1f = dsp.bandpass(SampledSignal(pair.s1, tr.fps), lo_hz, hi_hz, order).values
    s2f = dsp.bandpass(SampledSignal(pair.s2, tr.fps), lo_hz, hi_hz, order).values
    x = alpha_tune(ChromPair(s1f, s2f), tr.fps)
    x = dsp.detrend(x, detrend_sec)
    try:
        return dsp.normalize01(x)
    except DegenerateInputError as exc:
        raise DegenerateChrominanceError(str(exc)) from exc

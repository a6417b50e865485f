"""Per-window HR/HRV/IBI scoring of pulse estimates against reference PPG windows."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dsp, io
from .dsp import SampledSignal
from .errors import NoPeaksError
from .metrics import (
    IbiSequence,
    bland_altman,
    detect_peaks,
    hr_error_suite,
    hr_from_ibi,
    ibi_ae,
    ibi_from_peaks,
)

METHODS = ("chrom", "dae", "pulsegan")
WINDOW_HEADER = ["window_id", "method", "hr_pred", "hr_ref", "avnn_pred", "avnn_ref",
                 "sdnn_pred", "sdnn_ref", "ibi_ae"]
REPORT_HEADER = ["method", "HR_mae", "HR_rmse", "HR_mer", "r", "AVNN_mae", "SDNN_mae", "IBI_mae"]
BA_HEADER = ["method", "n", "bias", "lower", "upper"]


@dataclass(frozen=True, eq=False)
class WindowFeatures:
    hr: float
    avnn: float
    sdnn: float
    ibi: IbiSequence
    fallback: bool      # True when peaks were unusable and the spectrum was used


def _spectral_ibi(s: SampledSignal, band):
    """Constant-interval stand-in built from the dominant frequency."""
    v = s.values - s.values.mean()
    f = dsp.dominant_frequency(dsp.spectrum1024(s.with_values(v)), *band)
    period = max(1, int(round(s.sample_rate_hz / f)))
    rr = 1000.0 * period / s.sample_rate_hz
    return IbiSequence(np.array([0, period]), np.array([rr]), np.array([False]), s.sample_rate_hz)


def window_features(values, fps=30.0, band=dsp.DEFAULT_BAND) -> WindowFeatures:
    s = SampledSignal(np.asarray(values, dtype=np.float64), fps)
    try:
        ibi = ibi_from_peaks(detect_peaks(s, *band), fps)
        if ibi.nn_ms.size == 0:
            raise NoPeaksError("every interval was gated")
        fallback = False
    except NoPeaksError:
        ibi = _spectral_ibi(s, band)
        fallback = True
    nn = ibi.nn_ms
    avnn = float(nn.mean())
    # one surviving interval carries no spread information
    sdnn = float(np.sqrt(np.sum((nn - avnn) ** 2) / (nn.size - 1))) if nn.size >= 2 else 0.0
    return WindowFeatures(hr_from_ibi(ibi), avnn, sdnn, ibi, fallback)


def evaluate_windows(ref, preds: dict, fps=30.0, band=dsp.DEFAULT_BAND):
    """Score every method on every window.

    ``ref`` is (N, W) reference PPG windows; ``preds`` maps method name to
    (N, W) pulse estimates. Returns rows in ``WINDOW_HEADER`` order, window
    by window, methods in the order given.
    """
    ref = np.atleast_2d(ref)
    for name, p in preds.items():
        if np.shape(p) != ref.shape:
            raise ValueError(f"{name}: shape {np.shape(p)} does not match reference {ref.shape}")
    rows = []
    n = ref.shape[1]
    for i in range(ref.shape[0]):
        fr = window_features(ref[i], fps, band)
        for name, p in preds.items():
            fp = window_features(p[i], fps, band)
            rows.append([i, name, fp.hr, fr.hr, fp.avnn, fr.avnn, fp.sdnn, fr.sdnn,
                         ibi_ae(fp.ibi, fr.ibi, n)])
    return rows


@dataclass(frozen=True)
class EvalReport:
    method: str
    hr_mae: float
    hr_rmse: float
    hr_mer: float
    r: float
    avnn_mae: float
    sdnn_mae: float
    ibi_mae: float
    n_windows: int

    def row(self):
        return [self.method, self.hr_mae, self.hr_rmse, self.hr_mer, self.r, self.avnn_mae,
                self.sdnn_mae, self.ibi_mae]


def _by_method(rows):
    out = {}
    for r in rows:
        out.setdefault(r[1], []).append(r)
    return out


def summarize(rows):
    """Aggregate per-window rows into one EvalReport per method (row order kept)."""
    reports = {}
    for method, rs in _by_method(rows).items():
        a = np.array([r[2:] for r in rs], dtype=np.float64)
        hr = hr_error_suite(a[:, 0], a[:, 1])
        reports[method] = EvalReport(
            method, hr.mae, hr.rmse, hr.mer, hr.r,
            float(np.mean(np.abs(a[:, 2] - a[:, 3]))),
            float(np.mean(np.abs(a[:, 4] - a[:, 5]))),
            float(np.mean(a[:, 6])), len(rs))
    return reports


def bland_altman_rows(rows):
    out = []
    for method, rs in _by_method(rows).items():
        pred = [r[2] for r in rs]
        ref = [r[3] for r in rs]
        if len(rs) < 2:
            out.append([method, len(rs), math.nan, math.nan, math.nan])
            continue
        ba = bland_altman(pred, ref)
        out.append([method, len(rs), ba.bias, ba.lower, ba.upper])
    return out


def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return io.fmt(v)


def write_window_csv(path, rows):
    io.write_table(path, WINDOW_HEADER, ([_cell(v) for v in r] for r in rows))


def read_window_csv(path):
    header, raw = io.read_table(path)
    if header != WINDOW_HEADER:
        raise ValueError(f"{path}: unexpected header {header}")
    return [[int(r[0]), r[1]] + [float(x) for x in r[2:]] for r in raw]


def write_report(path, reports):
    io.write_table(path, REPORT_HEADER, ([_cell(v) for v in rep.row()] for rep in reports.values()))


def write_bland_altman(path, rows):
    io.write_table(path, BA_HEADER, ([_cell(v) for v in r] for r in rows))


def format_table(reports):
    """Fixed-width text rendering of the summary table."""
    lines = ["{:<10}{:>9}{:>9}{:>9}{:>8}{:>10}{:>10}{:>9}".format(*REPORT_HEADER)]
    for rep in reports.values():
        lines.append("{:<10}{:>9.3f}{:>9.3f}{:>8.2f}%{:>8.3f}{:>10.2f}{:>10.2f}{:>9.2f}".format(
            *rep.row()))
    return "\n".join(lines)

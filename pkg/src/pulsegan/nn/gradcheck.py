"""Central finite-difference verification of analytic backward passes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GradCheckReport:
    max_rel_error: float
    errors: dict = field(default_factory=dict)  # name -> max relative error
    checked: int = 0
    skipped: int = 0   # probes whose perturbation crossed a rectifier kink

    def passed(self, tol=1e-4):
        return bool(self.max_rel_error < tol)


def rel_error(analytic, numeric, floor=1e-6):
    """Elementwise ``|a-n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def _coords(size, max_coords, rng):
    if max_coords is None or size <= max_coords:
        return np.arange(size)
    return np.sort(rng.choice(size, max_coords, replace=False))


def grad_check(fragment, x, h=1e-5, max_coords=None, seed=0, floor=1e-6, check_input=True):
    """Compare analytic and central-difference gradients of ``sum(r * f(x))``.

    ``fragment`` exposes ``forward(x)``, ``backward(gy) -> gx`` and
    ``params()``; ``r`` is a fixed random projection. With ``max_coords`` set,
    at most that many randomly chosen entries per tensor are probed.

    If the fragment also has ``kink_state()`` (sign pattern of every
    rectifier input after the last forward), probes whose +h or -h
    evaluation changes that pattern are skipped: a central difference
    straddling a kink does not estimate the derivative. ``floor`` bounds
    the denominator so entries dominated by rounding noise (|g| << floor)
    are judged in absolute terms.
    """
    rng = np.random.default_rng(seed)
    x = np.array(x, dtype=np.float64)
    params = fragment.params()
    for p in params:
        p.zero_grad()
    y = fragment.forward(x)
    r = rng.standard_normal(np.shape(y))
    gx = fragment.backward(r)
    analytic = {p.name: p.grad.copy() for p in params}
    kinks = getattr(fragment, "kink_state", None)
    base = kinks() if kinks is not None else None
    for p in params:
        p.zero_grad()

    def loss():
        return float(np.sum(r * fragment.forward(x)))

    report = GradCheckReport(0.0)

    def probe(name, arr, ana):
        flat = arr.reshape(-1)
        idx = _coords(flat.size, max_coords, rng)
        num = np.empty(idx.size)
        smooth = np.ones(idx.size, dtype=bool)
        for j, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + h
            lp = loss()
            if base is not None:
                smooth[j] = np.array_equal(kinks(), base)
            flat[i] = old - h
            lm = loss()
            if base is not None:
                smooth[j] &= np.array_equal(kinks(), base)
            flat[i] = old
            num[j] = (lp - lm) / (2.0 * h)
        ana = ana.reshape(-1)[idx][smooth]
        err = float(np.max(rel_error(ana, num[smooth], floor))) if ana.size else 0.0
        report.errors[name] = err
        report.checked += int(smooth.sum())
        report.skipped += int((~smooth).sum())
        report.max_rel_error = max(report.max_rel_error, err)

    if check_input:
        probe("input", x, gx)
    for p in params:
        probe(p.name, p.value, analytic[p.name])
    for p in params:
        p.zero_grad()
    return report

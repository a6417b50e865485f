"""Generator and discriminator objectives with their gradients.

All signals are (batch, length) arrays in the [-1, 1] domain. L1 terms are
per-element means; the adversarial terms are least-squares, averaged over
the batch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import NFFT


@dataclass(frozen=True)
class LossWeights:
    lam: float = 10.0   # waveform (time-domain) L1 weight
    beta: float = 10.0  # spectrum L1 weight

    def __post_init__(self):
        if self.lam < 0 or self.beta < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class GeneratorLoss:
    total: float
    adversarial: float
    waveform: float
    spectrum: float


def batch_spectrum(x):
    """One-sided 1024-point complex spectra and magnitudes of each row."""
    z = np.fft.rfft(np.asarray(x, dtype=np.float64), n=NFFT, axis=-1)
    return z, np.abs(z)


def spectrum_l1(g, ref):
    """Mean |  |FFT(ref)| - |FFT(g)|  | over batch and 513 bins, with d/dg.

    Each row's mean is removed first. The DC magnitude cannot tell a
    positive offset from a negative one and otherwise outweighs every
    cardiac bin, which lets training settle on a sign-flipped baseline.
    """
    g = g - g.mean(axis=-1, keepdims=True)
    ref = ref - ref.mean(axis=-1, keepdims=True)
    zg, mg = batch_spectrum(g)
    _, mr = batch_spectrum(ref)
    diff = mg - mr
    value = float(np.mean(np.abs(diff)))
    # d|Z_k|/dx_n = Re(conj(Z_k) e^{-i w k n}) / |Z_k|; sum over k via irfft
    coef = np.sign(diff) / diff.size
    safe = np.where(mg > 0, mg, 1.0)
    u = np.where(mg > 0, coef * zg / safe, 0.0)
    u[:, 1:-1] *= 0.5
    grad = NFFT * np.fft.irfft(u, n=NFFT, axis=-1)[:, : g.shape[-1]]
    # chain rule through the mean removal
    return value, grad - grad.mean(axis=-1, keepdims=True)


def waveform_l1(g, ref):
    d = g - ref
    return float(np.mean(np.abs(d))), np.sign(d) / d.size


def loss_generator(scores_fake, g, ref, weights: LossWeights = LossWeights(), adversarial=True):
    """Least-squares adversarial term plus weighted waveform and spectrum L1.

    Returns (GeneratorLoss, dL/dscores, dL/dg). With ``adversarial=False``
    the adversarial term is dropped (denoising-autoencoder ablation).
    """
    g = np.asarray(g, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    wave, gwave = waveform_l1(g, ref)
    spec, gspec = spectrum_l1(g, ref)
    if adversarial:
        s = np.asarray(scores_fake, dtype=np.float64)
        adv = float(0.5 * np.mean((s - 1.0) ** 2))
        gscore = (s - 1.0) / s.size
    else:
        adv, gscore = 0.0, None
    grad = weights.lam * gwave + weights.beta * gspec
    total = adv + weights.lam * wave + weights.beta * spec
    return GeneratorLoss(total, adv, wave, spec), gscore, grad


def loss_discriminator(scores_fake, scores_real):
    """Returns (loss, dL/dscores_fake, dL/dscores_real)."""
    sf = np.asarray(scores_fake, dtype=np.float64)
    sr = np.asarray(scores_real, dtype=np.float64)
    loss = float(0.5 * np.mean(sf ** 2) + 0.5 * np.mean((sr - 1.0) ** 2))
    return loss, sf / sf.size, (sr - 1.0) / sr.size

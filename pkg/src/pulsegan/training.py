"""Adversarial training loop, the waveform-only (DAE) ablation, and LR scheduling."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .losses import LossWeights, loss_discriminator, loss_generator, waveform_l1
from .models import Discriminator, Generator, NetPlan, to_pm1
from .nn import ReduceLROnPlateau, adam_step
from .nn.optim import ADAM_BETA1, ADAM_BETA2, ADAM_EPS

log = logging.getLogger(__name__)

MODES = ("pulsegan", "dae")
LOG_HEADER = ["epoch", "lr", "d_loss", "g_adv", "g_wave", "g_spec", "val_l1"]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 8
    lr: float = 1e-3
    factor: float = 0.1
    patience: int = 3
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    mode: str = "pulsegan"
    plan: NetPlan = field(default_factory=NetPlan)
    adam_beta1: float = ADAM_BETA1
    adam_beta2: float = ADAM_BETA2
    adam_eps: float = ADAM_EPS

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not 0 < self.factor < 1:
            raise ValueError("factor must lie in (0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def to_dict(self):
        return {
            "epochs": self.epochs, "batch_size": self.batch_size, "lr": self.lr,
            "factor": self.factor, "patience": self.patience, "lam": self.weights.lam,
            "beta": self.weights.beta, "seed": self.seed, "mode": self.mode,
            "adam_beta1": self.adam_beta1, "adam_beta2": self.adam_beta2,
            "adam_eps": self.adam_eps,
        }

    @classmethod
    def from_dict(cls, d, plan):
        d = dict(d)
        weights = LossWeights(float(d.pop("lam")), float(d.pop("beta")))
        return cls(weights=weights, plan=plan, **d)


class GanState:
    """Networks, optimizer/scheduler state and shuffling RNG for one run."""

    def __init__(self, cfg: TrainConfig, with_discriminator=None):
        self.cfg = cfg
        self.gen = Generator(cfg.plan, seed=cfg.seed)
        if with_discriminator is None:
            with_discriminator = cfg.mode == "pulsegan"
        self.disc = Discriminator(cfg.plan, seed=cfg.seed + 1) if with_discriminator else None
        self.scheduler = ReduceLROnPlateau(cfg.lr, cfg.factor, cfg.patience)
        self.rng = np.random.default_rng(cfg.seed)
        self.epoch = 0

    @property
    def lr(self):
        return self.scheduler.lr

    def _adam(self, store):
        c = self.cfg
        adam_step(store, self.lr, c.adam_beta1, c.adam_beta2, c.adam_eps)


def _mode_weights(cfg):
    # the ablation keeps only the waveform term
    return cfg.weights if cfg.mode == "pulsegan" else LossWeights(cfg.weights.lam, 0.0)


def generator_gradient(state: GanState, x, xc, weights=None, adversarial=None):
    """Accumulate generator parameter gradients for one batch without stepping.

    ``x`` and ``xc`` are [-1, 1]-domain (B, L) arrays. Returns the
    GeneratorLoss; gradients are left in ``state.gen.store``. Discriminator
    gradients produced on the way are discarded.
    """
    if adversarial is None:
        adversarial = state.cfg.mode == "pulsegan"
    weights = weights or _mode_weights(state.cfg)
    g = state.gen.forward(x)
    return _generator_backward(state, g, x, xc, weights, adversarial)


def _generator_backward(state, g, x, xc, weights, adversarial):
    if adversarial:
        scores = state.disc.forward(g, x)
        gl, gscore, grad = loss_generator(scores, g, xc, weights)
        gcand, _ = state.disc.backward(gscore)
        state.disc.store.zero_grad()
        grad = grad + gcand
    else:
        gl, _, grad = loss_generator(None, g, xc, weights, adversarial=False)
    state.gen.backward(grad)
    return gl


def train_step(state: GanState, x, xc):
    """One discriminator update on the detached generator output, then one
    generator update. In ``dae`` mode only the generator is touched, with
    the waveform loss alone. Inputs are [-1, 1]-domain (B, L) batches.
    """
    cfg = state.cfg
    g = state.gen.forward(x)
    d_loss = math.nan
    adversarial = cfg.mode == "pulsegan"
    if adversarial:
        disc = state.disc
        disc.train()
        # each forward must be followed by its own backward (layer caches)
        sf = disc.forward(g, x)
        disc.backward(sf / sf.size)
        sr = disc.forward(xc, x)
        disc.backward((sr - 1.0) / sr.size)
        d_loss, _, _ = loss_discriminator(sf, sr)
        state._adam(disc.store)
    gl = _generator_backward(state, g, x, xc, _mode_weights(cfg), adversarial)
    state._adam(state.gen.store)
    return {"d_loss": d_loss, "g_loss": gl.total,
            "g_adv": gl.adversarial if adversarial else math.nan,
            "g_wave": gl.waveform, "g_spec": gl.spectrum}


def validation_l1(gen: Generator, rough01, ref01, batch_size=64):
    """Mean per-element |G(X) - X_c| in the [-1, 1] domain."""
    total, count = 0.0, 0
    for i in range(0, len(rough01), batch_size):
        x = to_pm1(rough01[i:i + batch_size])
        y = gen.forward(x)
        d = np.abs(y - to_pm1(ref01[i:i + batch_size]))
        total += float(d.sum())
        count += d.size
    return total / count


@dataclass
class TrainResult:
    state: GanState
    log_rows: list
    initial_val_l1: float
    final_val_l1: float


def run_epoch(state: GanState, rough01, ref01):
    cfg = state.cfg
    n = len(rough01)
    perm = state.rng.permutation(n)
    nb = n // cfg.batch_size
    sums = {"d_loss": 0.0, "g_adv": 0.0, "g_wave": 0.0, "g_spec": 0.0}
    for bi in range(nb):
        idx = perm[bi * cfg.batch_size:(bi + 1) * cfg.batch_size]
        out = train_step(state, to_pm1(rough01[idx]), to_pm1(ref01[idx]))
        for k in sums:
            sums[k] += out[k]
    return {k: v / max(nb, 1) for k, v in sums.items()}


def train(cfg: TrainConfig, train_set, val_set, state: GanState = None, on_epoch=None) -> TrainResult:
    """Epoch loop with ReduceLROnPlateau on the validation waveform L1.

    ``train_set``/``val_set`` provide ``rough`` and ``ref`` arrays of
    [0, 1]-normalized windows. Resumes from ``state`` if given.
    """
    if len(train_set.rough) == 0:
        raise ValueError("empty training set")
    if len(train_set.rough) < cfg.batch_size:
        raise ValueError("training set smaller than one batch")
    if len(val_set.rough) == 0:
        raise ValueError("empty validation set")
    state = state or GanState(cfg)
    rows = []
    initial = validation_l1(state.gen, val_set.rough, val_set.ref)
    if state.epoch == 0:
        rows.append([0, state.lr, math.nan, math.nan, math.nan, math.nan, initial])
    val = initial
    while state.epoch < cfg.epochs:
        lr_used = state.lr
        means = run_epoch(state, train_set.rough, train_set.ref)
        val = validation_l1(state.gen, val_set.rough, val_set.ref)
        state.epoch += 1
        state.scheduler.step(val)
        row = [state.epoch, lr_used, means["d_loss"], means["g_adv"], means["g_wave"],
               means["g_spec"], val]
        rows.append(row)
        log.info("epoch %d lr=%.3g d=%.4f adv=%.4f wave=%.4f spec=%.4f val_l1=%.4f", *row)
        if on_epoch is not None:
            on_epoch(state, row)
    return TrainResult(state, rows, initial, val)


def with_mode(cfg: TrainConfig, mode):
    return replace(cfg, mode=mode)


__all__ = ["GanState", "LOG_HEADER", "TrainConfig", "TrainResult", "generator_gradient",
           "run_epoch", "train", "train_step", "validation_l1", "waveform_l1", "with_mode"]

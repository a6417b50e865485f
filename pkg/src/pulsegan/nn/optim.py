from __future__ import annotations

import math

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def adam_step(store, lr, beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
    """One bias-corrected Adam update of every parameter; zeroes grads after."""
    for p in store:
        p.step += 1
        g = p.grad
        p.m *= beta1
        p.m += (1.0 - beta1) * g
        p.v *= beta2
        p.v += (1.0 - beta2) * g * g
        mhat = p.m / (1.0 - beta1 ** p.step)
        vhat = p.v / (1.0 - beta2 ** p.step)
        p.value -= lr * mhat / (np.sqrt(vhat) + eps)
        p.zero_grad()


class ReduceLROnPlateau:
    """Multiply the learning rate by ``factor`` once the monitored value has
    failed to improve for more than ``patience`` consecutive epochs.

    Improvement means ``value < best * (1 - threshold)`` (relative mode, the
    usual default). After a reduction the bad-epoch counter restarts; a
    reduction smaller than ``eps`` is ignored.
    """

    def __init__(self, lr, factor=0.1, patience=3, threshold=1e-4, min_lr=0.0, eps=1e-8):
        if not 0 < factor < 1:
            raise ValueError("factor must lie in (0, 1)")
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.lr = float(lr)
        self.factor, self.patience = factor, patience
        self.threshold, self.min_lr, self.eps = threshold, min_lr, eps
        self.best = math.inf
        self.num_bad = 0

    def step(self, value):
        """Record one validation value; returns the learning rate to use next."""
        if value < self.best * (1.0 - self.threshold):
            self.best = float(value)
            self.num_bad = 0
        else:
            self.num_bad += 1
        if self.num_bad > self.patience:
            new = max(self.lr * self.factor, self.min_lr)
            if self.lr - new > self.eps:
                self.lr = new
            self.num_bad = 0
        return self.lr

    def state_dict(self):
        return {"lr": self.lr, "best": self.best, "num_bad": self.num_bad,
                "factor": self.factor, "patience": self.patience,
                "threshold": self.threshold, "min_lr": self.min_lr, "eps": self.eps}

    def load_state_dict(self, st):
        self.lr = float(st["lr"])
        self.best = float(st["best"])
        self.num_bad = int(st["num_bad"])
        self.factor, self.patience = float(st["factor"]), int(st["patience"])
        self.threshold, self.min_lr = float(st["threshold"]), float(st["min_lr"])
        self.eps = float(st.get("eps", 1e-8))

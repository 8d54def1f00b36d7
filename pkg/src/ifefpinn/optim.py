import numpy as np


class Adam:
    """Adam on a flat parameter vector (Kingma & Ba defaults)."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, x, g):
        if self.m is None:
            self.m = np.zeros_like(x)
            self.v = np.zeros_like(x)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        mhat = self.m / (1 - self.beta1 ** self.t)
        vhat = self.v / (1 - self.beta2 ** self.t)
        return x - self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def state(self):
        return {"t": self.t, "m": self.m, "v": self.v}


class GradientDescent:
    def __init__(self, lr=1e-3):
        self.lr = lr

    def step(self, x, g):
        return x - self.lr * g


def make_optimizer(kind, lr):
    if kind == "adam":
        return Adam(lr)
    if kind in ("gd", "sgd"):
        return GradientDescent(lr)
    raise ValueError(f"unknown optimizer {kind!r}")

"""Adam optimizer and max-norm weight projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    eps: float = 1e-8


class Adam:
    """Adam with bias correction.  State is keyed by parameter identity."""

    def __init__(self, params: list[tuple[str, Tensor]], cfg: AdamConfig):
        self.cfg = cfg
        self.params = params
        self.state = {name: (np.zeros_like(p.data), np.zeros_like(p.data))
                      for name, p in params}
        self.t = 0

    def step(self):
        self.t += 1
        c = self.cfg
        b1t = 1.0 - c.beta1 ** self.t
        b2t = 1.0 - c.beta2 ** self.t
        for name, p in self.params:
            if p.grad is None:
                continue
            g = p.grad
            m, v = self.state[name]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * (g * g)
            mhat = m / b1t
            vhat = v / b2t
            p.data -= (c.lr * mhat / (np.sqrt(vhat) + c.eps)).astype(p.data.dtype)

    def zero_grad(self):
        for _, p in self.params:
            p.grad = None


def maxnorm_project(w: Tensor, c: float):
    """Clamp each column's L2 norm of a (n_in, n_out) weight matrix to c."""
    norms = np.sqrt((w.data * w.data).sum(axis=0, keepdims=True))
    scale = np.minimum(1.0, c / np.maximum(norms, 1e-12))
    w.data *= scale.astype(w.data.dtype)

"""AdamW with decoupled weight decay and linear warmup."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .tensor import Parameter


class AdamW:
    def __init__(self, params, lr: float, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0, warmup_steps: int = 0):
        if lr < 0:
            raise ConfigError(f"negative learning rate {lr}")
        self.params: list[Parameter] = list(params)
        self.lr = float(lr)
        self.beta1, self.beta2 = betas
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.warmup_steps = int(warmup_steps)
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def current_lr(self) -> float:
        """Learning rate that the next step() will use."""
        if self.warmup_steps <= 0:
            return self.lr
        return self.lr * min(1.0, (self.t + 1) / self.warmup_steps)

    def step(self) -> float:
        lr_t = self.current_lr()
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad if p.grad is not None else 0.0
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            update = (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.data
            p.data -= lr_t * update
        return lr_t

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

"""Adam optimizer with bias correction.

Holds first/second moment buffers per parameter. Construct it over the
trainable leaves only; frozen parameters must never be handed to an
optimizer, which is what keeps the freeze contracts byte-exact.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import ContractError, DimensionError
from .tensor import Tensor


class Adam:
    def __init__(self, params: Iterable[Tensor], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        for p in self.params:
            if not p.requires_grad:
                raise ContractError("frozen parameter passed to Adam")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.first_moment = [np.zeros_like(p.data) for p in self.params]
        self.second_moment = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        """One bias-corrected update; a missing gradient counts as zero."""
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self.first_moment, self.second_moment):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            if g.shape != p.data.shape:
                raise DimensionError(
                    f"gradient shape {g.shape} does not match parameter {p.data.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / c1
            v_hat = v / c2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

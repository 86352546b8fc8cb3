"""Adam optimizer, warmup learning-rate schedule, gradient clipping."""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tensor


def lr_schedule(step: int, d_model: int, warmup: int = 8000) -> float:
    """Inverse-square-root schedule with linear warmup.

    lr = d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)
    """
    if step < 1:
        raise ValueError("lr_schedule: step starts at 1")
    return d_model ** -0.5 * min(step ** -0.5, step * warmup ** -1.5)


def clip_global_norm(params: dict[str, Tensor], max_norm: float = 1.0) -> float:
    """Scale all gradients in place so the joint L2 norm is <= max_norm.

    Returns the pre-clip norm.
    """
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = math.sqrt(total)
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= factor
    return norm


class Adam:
    """Adam with bias correction; defaults beta2=0.98, eps=1e-9."""

    def __init__(self, params: dict[str, Tensor], beta1: float = 0.9,
                 beta2: float = 0.98, eps: float = 1e-9):
        self.params = dict(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self._v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self, lr: float) -> None:
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            grad = p.grad
            if grad is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / bc1
            v_hat = v / bc2
            p.data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)

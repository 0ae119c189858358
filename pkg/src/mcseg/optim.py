"""Adam with the inverse-square-root warmup schedule used for training."""

from __future__ import annotations

import math

import numpy as np

from .tensor import Tensor


def noam_lr(step: int, d_model: int, warmup_steps: int) -> float:
    """Learning rate at ``step`` (1-based): warmup then inverse-sqrt decay.

    Rises linearly for step < warmup_steps, peaks exactly at step ==
    warmup_steps, decays as step**-0.5 afterwards.
    """
    if step < 1:
        raise ValueError("step must be >= 1")
    if warmup_steps < 1:
        raise ValueError("warmup_steps must be >= 1")
    return d_model ** -0.5 * min(step ** -0.5, step * warmup_steps ** -1.5)


class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    def __init__(self, params: dict[str, Tensor], d_model: int,
                 warmup_steps: int, beta1: float = 0.9, beta2: float = 0.98,
                 eps: float = 1e-9):
        self.step = 0
        self.d_model = d_model
        self.warmup_steps = warmup_steps
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}


def adam_step(params: dict[str, Tensor], state: AdamState, lr: float | None = None,
              frozen: frozenset[str] | set[str] = frozenset(),
              grad_masks: dict[str, np.ndarray] | None = None) -> float:
    """One bias-corrected Adam update in place; returns the rate used.

    Parameters named in ``frozen`` are untouched (values and moments alike).
    ``grad_masks`` multiplies a parameter's gradient elementwise before the
    update, which pins masked entries exactly (zero gradient keeps zero
    moments, so the update is identically zero there).
    """
    state.step += 1
    if lr is None:
        lr = noam_lr(state.step, state.d_model, state.warmup_steps)
    b1, b2, eps = state.beta1, state.beta2, state.eps
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        if name in frozen or p.grad is None:
            continue
        g = p.grad
        if grad_masks is not None and name in grad_masks:
            g = g * grad_masks[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return lr


def global_grad_norm(params: dict[str, Tensor]) -> float:
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    return math.sqrt(total)


def clip_global_norm(params: dict[str, Tensor], max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most ``max_norm``."""
    norm = global_grad_norm(params)
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= factor
    return norm

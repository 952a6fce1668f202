"""Adam and a reduce-on-plateau learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class OptimizerState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(state: OptimizerState, params: Sequence[Tensor], grads: Sequence[np.ndarray | None]) -> None:
    """One bias-corrected Adam update, in place. ``None`` grads count as zero."""
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} params vs {len(grads)} grads")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.shape or m.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


class Adam:
    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.state = OptimizerState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float) -> None:
        self.state.lr = value

    def step(self) -> None:
        adam_step(self.state, self.params, [p.grad for p in self.params])

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` once the monitored metric has
    failed to improve by more than ``threshold`` for ``patience`` epochs."""

    def __init__(self, factor: float = 0.5, patience: int = 5, min_lr: float = 1e-6, threshold: float = 1e-6):
        if not 0.0 < factor < 1.0:
            raise ValueError("factor must be in (0, 1)")
        if patience < 1:
            raise ValueError("patience must be positive")
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.threshold = threshold
        self.best = np.inf
        self.bad_epochs = 0

    def step(self, metric: float, lr: float) -> float:
        if metric < self.best - self.threshold:
            self.best = metric
            self.bad_epochs = 0
            return lr
        self.bad_epochs += 1
        if self.bad_epochs >= self.patience:
            self.bad_epochs = 0
            return max(lr * self.factor, self.min_lr)
        return lr


def plateau_schedule(history: Sequence[float], lr: float, factor: float = 0.5, patience: int = 5,
                     min_lr: float = 1e-6) -> float:
    """Learning rate after replaying a whole metric history through the schedule."""
    sched = PlateauScheduler(factor, patience, min_lr)
    for value in history:
        lr = sched.step(value, lr)
    return lr

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimState:
    beta1: float = 0.9
    beta2: float = 0.99
    lr: float = 1e-4
    weight_decay: float = 0.01
    step: int = 0
    momentum: dict = field(default_factory=dict)


def lion_step(params, grads, state: OptimState, lr_t: float):
    """One Lion update, in place on the ``params`` arrays.

    ``u = sign(b1*m + (1-b1)*g)``, ``p -= lr*(u + wd*p)``, ``m = b2*m + (1-b2)*g``.
    ``params`` and ``grads`` map names to arrays; returns ``(params, state)``.
    """
    b1, b2, wd = state.beta1, state.beta2, state.weight_decay
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {name}")
        m = state.momentum.get(name)
        if m is None:
            m = np.zeros_like(p)
        u = np.sign(b1 * m + (1.0 - b1) * g)
        p -= lr_t * (u + wd * p)
        state.momentum[name] = b2 * m + (1.0 - b2) * g
    state.step += 1
    return params, state


@dataclass
class ScheduleConfig:
    total_epochs: float = 100
    warmup_epochs: float = 10
    peak_lr: float = 1e-4
    min_lr: float = 1e-6

    def __post_init__(self):
        if not 0 <= self.warmup_epochs < self.total_epochs:
            raise ValueError("need 0 <= warmup_epochs < total_epochs")
        if not 0 <= self.min_lr < self.peak_lr:
            raise ValueError("need 0 <= min_lr < peak_lr")


def lr_at(epoch, cfg: ScheduleConfig) -> float:
    """Linear warmup from 0 to ``peak_lr``, then cosine decay to ``min_lr``.

    ``epoch`` may be fractional; it is clamped to ``[0, total_epochs]``.
    """
    t = min(max(float(epoch), 0.0), float(cfg.total_epochs))
    if cfg.warmup_epochs and t <= cfg.warmup_epochs:
        return cfg.peak_lr * t / cfg.warmup_epochs
    frac = (t - cfg.warmup_epochs) / (cfg.total_epochs - cfg.warmup_epochs)
    return cfg.min_lr + (cfg.peak_lr - cfg.min_lr) * 0.5 * (1.0 + math.cos(math.pi * frac))

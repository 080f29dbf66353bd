"""Adam with bias correction and a step-decay learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import GradientMap


@dataclass
class Hyper:
    """Training-loop knobs. Defaults follow the reference recipe."""

    base_lr: float = 0.01
    decay_factor: float = 0.5
    decay_every: int = 20
    epochs: int = 350
    batch_size: int = 32
    dropout_p: float = 0.5
    lam: float = 0.2  # reconstruction-loss weight
    seed: int = 1

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ValueError("base_lr must be positive")
        if not (0 < self.decay_factor <= 1):
            raise ValueError("decay_factor must be in (0, 1]")
        if self.decay_every < 1 or self.epochs < 1:
            raise ValueError("decay_every and epochs must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (train-mode batch norm)")
        if not (0 <= self.dropout_p < 1):
            raise ValueError("dropout_p must be in [0, 1)")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")


def lr_at_epoch(hyper: Hyper, epoch: int) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return hyper.base_lr * hyper.decay_factor ** (epoch // hyper.decay_every)


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, named_params: list) -> "AdamState":
        state = cls()
        for name, p in named_params:
            state.m[name] = np.zeros_like(p.values)
            state.v[name] = np.zeros_like(p.values)
        return state


def adam_step(named_params: list, grads: GradientMap, state: AdamState, lr: float):
    """One update, in place. Parameters are independent: a zero gradient
    leaves its parameter exactly unchanged."""
    if lr < 0:
        raise ValueError("lr must be >= 0")
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for name, p in named_params:
        g = grads.of(p)
        if g.shape != p.values.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} vs parameter {p.values.shape}")
        m = state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        p.values = p.values - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)

"""AdamW with decoupled weight decay and the cosine-annealing schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff.tensor import Tensor
from .errors import DimensionError, NumericalError


@dataclass
class ScheduleConfig:
    lr_max: float = 1e-4
    lr_min: float = 1e-6
    epochs: int = 100
    batch_size: int = 16
    input_size: int = 512

    def validate(self) -> None:
        if self.lr_min > self.lr_max:
            raise ValueError(f"lr_min {self.lr_min} exceeds lr_max {self.lr_max}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def cosine_lr(t: float, cfg: ScheduleConfig) -> float:
    if not 0 <= t <= cfg.epochs:
        raise ValueError(f"epoch {t} outside [0, {cfg.epochs}]")
    if t == cfg.epochs:
        return cfg.lr_min
    return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + math.cos(math.pi * t / cfg.epochs))


class AdamW:
    """Adam moments with bias correction; decay applied to the weights directly."""

    def __init__(self, named_params, weight_decay: float = 5e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(named_params)
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {n: np.zeros_like(p.data) for n, p in self.params}
        self.v = {n: np.zeros_like(p.data) for n, p in self.params}

    def step(self, lr: float) -> None:
        for name, p in self.params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if g.shape != p.data.shape:
                raise DimensionError(f"{name}: gradient shape {g.shape} != parameter shape {p.data.shape}")
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"non-finite gradient in parameter {name}")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for name, p in self.params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            mhat = m / c1
            vhat = v / c2
            p.data -= (lr * (mhat / (np.sqrt(vhat) + self.eps) + self.weight_decay * p.data)).astype(p.data.dtype)

    def state_entries(self) -> list:
        out = [("optim/step", np.array([self.t], dtype=np.float64))]
        out += [(f"optim/m/{n}", self.m[n]) for n, _ in self.params]
        out += [(f"optim/v/{n}", self.v[n]) for n, _ in self.params]
        return out

    def load_state_entries(self, entries) -> None:
        self.t = int(entries["optim/step"][0])
        for n, _ in self.params:
            self.m[n][...] = entries[f"optim/m/{n}"]
            self.v[n][...] = entries[f"optim/v/{n}"]


def adamw_step(params, grads, state: AdamW | None = None, lr: float = 1e-3, weight_decay: float = 5e-4):
    """Functional form over plain arrays; returns (new params, state).

    Pass the returned state back in to continue the same moment sequence.
    """
    tensors = [Tensor(np.array(p, dtype=np.float64), requires_grad=True) for p in params]
    for t, g in zip(tensors, grads):
        t.grad = np.asarray(g, dtype=np.float64)
    named = [(str(i), t) for i, t in enumerate(tensors)]
    if state is None:
        state = AdamW(named, weight_decay=weight_decay)
    else:
        state.params = named
    state.step(lr)
    return [t.data for t in tensors], state

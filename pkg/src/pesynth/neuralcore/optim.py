"""SGD and Adam updates, plus learning-rate schedules."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import ParamStore
from .tensor import ShapeError


@dataclass
class OptimizerConfig:
    kind: str = "adam"  # sgd | adam
    lr: float = 1e-3
    scheduler: str = "step"  # step | plateau | cosine | none
    step_size: int = 4
    gamma: float = 0.1
    patience: int = 10
    t_max: int = 10
    eta_min: float = 0.0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    momentum: float = 0.0
    extra: dict = field(default_factory=dict)


class Optimizer:
    def __init__(self, store: ParamStore, cfg: OptimizerConfig, names=None):
        self.store = store
        self.cfg = cfg
        self.lr = cfg.lr
        self.names = list(store.names() if names is None else names)
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, grads: dict | None = None) -> None:
        """Apply one update. ``grads`` defaults to each parameter's ``.grad``."""
        self.t += 1
        b1, b2 = self.cfg.betas
        for name in self.names:
            p = self.store[name]
            g = p.grad if grads is None else grads.get(name)
            if g is None:
                continue
            if g.shape != p.shape:
                raise ShapeError(f"gradient for {name}: {g.shape} != {p.shape}")
            if self.cfg.kind == "sgd":
                if self.cfg.momentum:
                    buf = self.m.get(name)
                    buf = g if buf is None else self.cfg.momentum * buf + g
                    self.m[name] = buf
                    g = buf
                p.data = (p.data - self.lr * g).astype(p.data.dtype)
            elif self.cfg.kind == "adam":
                m = self.m.get(name, np.zeros_like(p.data))
                v = self.v.get(name, np.zeros_like(p.data))
                m = b1 * m + (1 - b1) * g
                v = b2 * v + (1 - b2) * g * g
                self.m[name], self.v[name] = m, v
                mhat = m / (1 - b1 ** self.t)
                vhat = v / (1 - b2 ** self.t)
                p.data = (p.data - self.lr * mhat / (np.sqrt(vhat) + self.cfg.eps)).astype(p.data.dtype)
            else:
                raise ValueError(f"unknown optimizer {self.cfg.kind!r}")


class Scheduler:
    """Epoch-level learning-rate schedule."""

    def __init__(self, opt: Optimizer):
        self.opt = opt
        self.cfg = opt.cfg
        self.base = opt.cfg.lr
        self.epoch = 0
        self.best = math.inf
        self.bad = 0

    def step(self, val_loss: float | None = None) -> float:
        self.epoch += 1
        c = self.cfg
        if c.scheduler == "step":
            self.opt.lr = self.base * c.gamma ** (self.epoch // c.step_size)
        elif c.scheduler == "cosine":
            k = self.epoch % (2 * c.t_max)
            self.opt.lr = c.eta_min + (self.base - c.eta_min) * (1 + math.cos(math.pi * k / c.t_max)) / 2
        elif c.scheduler == "plateau":
            if val_loss is not None:
                if val_loss < self.best:
                    self.best, self.bad = val_loss, 0
                else:
                    self.bad += 1
                    if self.bad > c.patience:
                        self.opt.lr *= c.gamma
                        self.bad = 0
        elif c.scheduler != "none":
            raise ValueError(f"unknown scheduler {c.scheduler!r}")
        return self.opt.lr

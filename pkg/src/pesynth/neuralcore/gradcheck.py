"""Finite-difference verification of analytic gradients."""
from __future__ import annotations

import numpy as np

from .params import ParamStore
from .tensor import precision


def grad_check(f, store: ParamStore, eps: float = 1e-5, names=None, max_entries: int | None = None,
               seed: int = 0) -> float:
    """Largest relative error between backprop and central differences.

    ``f()`` must build a scalar loss from ``store``. The store is converted to
    float64 for the check and restored afterwards. Relative error per
    parameter is ``|a - n| / max(|a| + |n|, 1e-12)`` over the whole tensor
    (Euclidean norms). ``max_entries`` samples that many coordinates per
    tensor instead of probing all of them.
    """
    names = list(store.names() if names is None else names)
    saved = {k: v.data.copy() for k, v in store.items()}
    rng = np.random.default_rng(seed)
    worst = 0.0
    try:
        store.astype(np.float64)
        with precision(np.float64):
            store.zero_grad()
            loss = f()
            loss.backward()
            analytic = {k: (store[k].grad if store[k].grad is not None else np.zeros_like(store[k].data))
                        for k in names}
            for k in names:
                p = store[k]
                flat = p.data.reshape(-1)
                idx = np.arange(flat.size)
                if max_entries is not None and flat.size > max_entries:
                    idx = rng.choice(flat.size, max_entries, replace=False)
                num = np.zeros(len(idx))
                for n, i in enumerate(idx):
                    old = flat[i]
                    flat[i] = old + eps
                    up = float(f().data)
                    flat[i] = old - eps
                    down = float(f().data)
                    flat[i] = old
                    num[n] = (up - down) / (2 * eps)
                a = analytic[k].reshape(-1)[idx]
                denom = max(np.linalg.norm(a) + np.linalg.norm(num), 1e-12)
                worst = max(worst, float(np.linalg.norm(a - num) / denom))
    finally:
        for k, v in saved.items():
            store[k].data = v
        store.zero_grad()
    return worst

"""Named parameter storage and the AdamW update."""

from __future__ import annotations

import math

import numpy as np

from .tensor import Tape, Tensor

__all__ = ["ParamStore", "adam_step", "cosine_lr"]


class ParamStore:
    """name -> float64 array map with optimiser slots.

    Names are unique and shapes stay fixed across steps.  ``tensors`` wraps
    every array as a grad-requiring leaf on a fresh tape; the training loop
    builds one tape per step.
    """

    def __init__(self, params: dict[str, np.ndarray] | None = None):
        self.params: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step_count = 0
        if params:
            for name, arr in params.items():
                self.add(name, arr)

    def add(self, name: str, arr) -> None:
        if name in self.params:
            raise ValueError(f"duplicate parameter name: {name}")
        arr = np.asarray(arr, dtype=np.float64)
        self.params[name] = arr
        self.m[name] = np.zeros_like(arr)
        self.v[name] = np.zeros_like(arr)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list[str]:
        return list(self.params.keys())

    def tensors(self, tape: Tape) -> dict[str, Tensor]:
        """Leaf tensors for one forward/backward pass."""
        return {name: Tensor(arr, requires_grad=True, tape=tape) for name, arr in self.params.items()}

    @staticmethod
    def gradients(leaves: dict[str, Tensor]) -> dict[str, np.ndarray]:
        """Collect per-name gradients after Tape.backward (zeros if untouched)."""
        return {
            name: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for name, t in leaves.items()
        }

    def copy(self) -> "ParamStore":
        other = ParamStore()
        for name, arr in self.params.items():
            other.add(name, arr.copy())
        for name in self.params:
            other.m[name] = self.m[name].copy()
            other.v[name] = self.v[name].copy()
        other.step_count = self.step_count
        return other


def adam_step(
    store: ParamStore,
    grads: dict[str, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps_opt: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """One decoupled-weight-decay Adam update, in place."""
    store.step_count += 1
    t = store.step_count
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in store.params.items():
        g = grads[name]
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        mhat = m / bc1
        vhat = v / bc2
        if weight_decay:
            p -= lr * weight_decay * p
        p -= lr * mhat / (np.sqrt(vhat) + eps_opt)


def cosine_lr(base_lr: float, step: int, total_steps: int, min_lr: float = 0.0) -> float:
    """Cosine annealing from base_lr to min_lr over total_steps."""
    if total_steps <= 1:
        return base_lr
    frac = min(max(step / (total_steps - 1), 0.0), 1.0)
    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + math.cos(math.pi * frac))

"""Bias-corrected Adam with linear batch-size learning-rate scaling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdamState", "adam_step", "adam_step_rows"]


@dataclass
class AdamState:
    """Adam moments plus the shared step count and learning-rate policy."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    base_lr: float = 0.001
    batch_size: int = 256
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.base_lr <= 0 or not np.isfinite(self.base_lr):
            raise ValueError(f"base_lr must be positive, got {self.base_lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError("beta1 and beta2 must lie in [0, 1)")

    @classmethod
    def for_params(cls, params: dict, base_lr: float = 0.001, batch_size: int = 256) -> "AdamState":
        state = cls(base_lr=base_lr, batch_size=batch_size)
        state.m = {k: np.zeros_like(v) for k, v in params.items()}
        state.v = {k: np.zeros_like(v) for k, v in params.items()}
        return state

    @property
    def effective_lr(self) -> float:
        """base_lr scaled linearly by batch_size / 256."""
        return self.base_lr * self.batch_size / 256.0


def _check_finite(name: str, g: np.ndarray) -> None:
    if not np.isfinite(g).all():
        raise FloatingPointError(f"non-finite gradient in parameter block '{name}'")


def adam_step(state: AdamState, params: dict, grads: dict) -> None:
    """One in-place update of every block named in grads."""
    state.step += 1
    lr = state.effective_lr
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for name, g in grads.items():
        g = np.asarray(g, dtype=np.float64)
        _check_finite(name, g)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        params[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def adam_step_rows(state: AdamState, name: str, param: np.ndarray, rows: np.ndarray, grad_rows: np.ndarray) -> None:
    """One update restricted to `rows` of a single block (sparse-row Adam).

    The step counter is global, so bias correction matches adam_step; moments
    of untouched rows are left as they are.
    """
    g = np.asarray(grad_rows, dtype=np.float64)
    _check_finite(name, g)
    state.step += 1
    lr = state.effective_lr
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    m = state.beta1 * state.m[name][rows] + (1.0 - state.beta1) * g
    v = state.beta2 * state.v[name][rows] + (1.0 - state.beta2) * (g * g)
    state.m[name][rows] = m
    state.v[name][rows] = v
    param[rows] -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)

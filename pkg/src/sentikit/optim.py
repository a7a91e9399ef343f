"""Binary cross-entropy, Adam and classification metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .autodiff import ShapeError, Tape, Tensor

PROB_CLAMP = 1e-7


class NonFiniteGradientError(FloatingPointError):
    pass


def bce_loss(tape: Tape, p: Tensor, y) -> Tensor:
    """Mean binary cross-entropy of probabilities ``p`` against 0/1 labels ``y``.

    Probabilities are clamped to [1e-7, 1 - 1e-7]. The gradient is that of
    the log terms evaluated at the clamped value; it is not zeroed outside
    the clamp, so a saturated wrong prediction still gets pushed back.
    """
    y = np.asarray(y, dtype=p.dtype).reshape(-1)
    if p.data.size != y.size:
        raise ShapeError(f"bce_loss: {p.data.size} probabilities vs {y.size} labels")
    n = y.size
    pc = np.clip(p.data.reshape(-1), PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = -np.mean(y * np.log(pc) + (1.0 - y) * np.log1p(-pc))
    shape = p.shape

    def back(g):
        dp = g * (-(y / pc) + (1.0 - y) / (1.0 - pc)) / n
        return (dp.reshape(shape).astype(p.dtype),)

    return tape.record(np.asarray(loss, dtype=p.dtype), (p,), back)


def binary_accuracy(p, y) -> float:
    p = np.asarray(p.data if isinstance(p, Tensor) else p).reshape(-1)
    y = np.asarray(y).reshape(-1)
    if p.size != y.size:
        raise ShapeError(f"binary_accuracy: {p.size} probabilities vs {y.size} labels")
    if p.size == 0:
        return 0.0
    return float(np.mean((p >= 0.5).astype(int) == y))


@dataclass
class Metrics:
    loss: float
    accuracy: float
    count: int


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray], state: AdamState) -> None:
    """Apply one bias-corrected Adam update to ``params`` in place."""
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for parameter {name!r} at step {state.t + 1}")
    state.t += 1
    b1, b2, t = state.beta1, state.beta2, state.t
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for name, g in grads.items():
        theta = params[name].data
        if name not in state.m:
            state.m[name] = np.zeros_like(theta)
            state.v[name] = np.zeros_like(theta)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        theta -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(theta.dtype)

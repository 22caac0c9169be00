"""
🚀 Adam optimizer with bias correction
"""

from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np

from src.core.nn import Grid
from src.utils.config import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, LEARNING_RATE
from src.utils.errors import InvalidArgumentError, NumericError


@dataclass(eq=False)
class AdamState:
    """
    📦 Moment estimates and step counter, keyed by parameter name

    Attributes:
        lr: Learning rate
        beta1: Decay of the first moment
        beta2: Decay of the second moment
        eps: Denominator guard
        t: Number of steps taken
        m: First moments
        v: Second moments (always >= 0)
    """

    lr: float = LEARNING_RATE
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Sequence[Grid], state: AdamState) -> None:
    """
    👣 One Adam update of every trainable grid, in place, from its `grad`

    m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)

    Raises:
        NumericError: If any gradient is non-finite (nothing is updated)
        InvalidArgumentError: If a stored moment has the wrong shape
    """
    trainable = [p for p in params if p.trainable]
    for grid in trainable:
        if not np.all(np.isfinite(grid.grad)):
            raise NumericError(f"non-finite gradient for {grid.name}")

    state.t += 1
    bias1 = 1.0 - state.beta1 ** state.t
    bias2 = 1.0 - state.beta2 ** state.t

    for grid in trainable:
        g = grid.grad
        if grid.name not in state.m:
            state.m[grid.name] = np.zeros_like(grid.value)
            state.v[grid.name] = np.zeros_like(grid.value)
        m, v = state.m[grid.name], state.v[grid.name]
        if m.shape != grid.value.shape:
            raise InvalidArgumentError(f"Adam moment shape {m.shape} does not match {grid.name} {grid.shape}")

        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)

        m_hat = m / bias1
        v_hat = v / bias2
        grid.value -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)

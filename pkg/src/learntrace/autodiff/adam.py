"""Bias-corrected Adam."""

from __future__ import annotations

from typing import Dict, Mapping, Sequence

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor


class AdamState:
    """First/second-moment accumulators for one parameter group."""

    def __init__(
        self,
        params: Sequence[Tensor],
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step = 0
        self.m: Dict[int, np.ndarray] = {id(p): np.zeros_like(p.data) for p in params}
        self.v: Dict[int, np.ndarray] = {id(p): np.zeros_like(p.data) for p in params}


def adam_step(
    params: Sequence[Tensor],
    grads: Mapping[Tensor, np.ndarray],
    state: AdamState,
    lr: float,
):
    """Apply one in-place Adam update to every parameter; returns (params, state)."""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for p in params:
        g = np.asarray(grads[p])
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
        m = state.m[id(p)]
        v = state.v[id(p)]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return params, state

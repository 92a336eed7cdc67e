"""Linear classifier heads shared by the non-recurrent tracers.

These are the inference-grade functional forms; the trainable models apply
the same math inside the autodiff graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ShapeError


def softmax_np(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass
class PredictedClassifier:
    """Per-step linear read-out: w is (C, D), b is (C,)."""

    w: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[0],):
            raise ShapeError(f"classifier shapes w{self.w.shape} b{self.b.shape} inconsistent")


def static_predict(z: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """softmax(w z + b); identical across learners and time-steps."""
    z = np.asarray(z, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if w.ndim != 2 or z.shape[-1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ShapeError(f"static_predict shapes z{z.shape} w{w.shape} b{b.shape} disagree")
    return softmax_np(z @ w.T + b)


def classify(cls: PredictedClassifier, z: np.ndarray) -> np.ndarray:
    """Apply an emitted per-step classifier to a query embedding."""
    return static_predict(z, cls.w, cls.b)


def time_indexed_predict(z: np.ndarray, t: int, weight_table) -> np.ndarray:
    """Per-step classifier lookup; t is 1-based over the training steps.

    ``weight_table`` is (w_all (T, C, D), b_all (T, C)). Queries beyond the
    table (the no-feedback test phase) must be clamped by the caller to the
    final training step.
    """
    w_all, b_all = weight_table
    if not 1 <= t <= w_all.shape[0]:
        raise ConfigError(f"time-step {t} outside [1, {w_all.shape[0]}]")
    return static_predict(z, w_all[t - 1], b_all[t - 1])

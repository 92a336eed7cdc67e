"""Sequence cross-entropy over observed responses."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..errors import ShapeError

CLAMP = 1e-12


def sequence_loss(
    probs: np.ndarray,
    responses: np.ndarray,
    clamp: float = CLAMP,
    clamp_counter: Optional[list] = None,
) -> float:
    """Mean negative log-probability of the responses over (learner, step).

    ``probs`` is (K, T, C) with valid distributions; ``responses`` is (K, T)
    of 1-based classes. Probabilities below ``clamp`` are clamped and counted.
    """
    probs = np.asarray(probs)
    responses = np.asarray(responses)
    if probs.shape[:2] != responses.shape:
        raise ShapeError(f"probs {probs.shape} and responses {responses.shape} disagree")
    sums = probs.sum(axis=-1)
    if not np.allclose(sums, 1.0, atol=1e-5):
        raise ShapeError("model outputs are not probability distributions")
    k, t = responses.shape
    picked = probs[np.arange(k)[:, None], np.arange(t)[None, :], responses - 1]
    low = picked < clamp
    if clamp_counter is not None and low.any():
        clamp_counter[0] += int(low.sum())
    return float(-np.mean(np.log(np.maximum(picked, clamp))))

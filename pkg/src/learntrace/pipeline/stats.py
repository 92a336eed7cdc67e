"""Learner performance statistics."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..data.sessions import TEST_STEPS, TRAIN_STEPS


def skewness(values) -> Optional[float]:
    """Adjusted Fisher-Pearson sample skewness; None below 3 samples."""
    x = np.asarray(list(values), dtype=np.float64)
    n = x.size
    if n < 3:
        return None
    m = x.mean()
    m2 = ((x - m) ** 2).mean()
    if m2 == 0:
        return 0.0
    m3 = ((x - m) ** 3).mean()
    g1 = m3 / m2**1.5
    return float(g1 * np.sqrt(n * (n - 1)) / (n - 2))


def correctness_stats(sessions) -> dict:
    """Per-phase histograms of per-learner correct counts plus skewness."""
    out = {}
    for phase, max_correct in (("train", TRAIN_STEPS), ("test", TEST_STEPS)):
        counts = [s.correct_count(phase) for s in sessions]
        hist = np.bincount(counts, minlength=max_correct + 1)
        out[phase] = {
            "counts": counts,
            "histogram": hist.tolist(),
            "mean": float(np.mean(counts)) if counts else None,
            "median": float(np.median(counts)) if counts else None,
            "skewness": skewness(counts),
        }
    return out

"""Prototype and exemplar categorization read-outs.

Both compare a query embedding against the stored interaction history using
an exponential-decay similarity over Euclidean distance. The prototype model
averages each class's past embeddings; the exemplar model sums similarities
over all stored items of each class, sharpened by a learnable exponent (the
prototype model has no exponent; asserting one is a configuration error).

Accumulations use exactly-rounded summation (math.fsum) so reordering the
history cannot change the result even in the last bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass
class CognitiveParams:
    """Similarity scale c > 0; gamma is learnable for exemplar, pinned to 1
    for prototype."""

    c: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.c <= 0:
            raise ConfigError(f"similarity scale must be positive, got {self.c}")
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")


def similarity(z_i: np.ndarray, z_j: np.ndarray, c: float) -> float:
    """exp(-c * ||z_i - z_j||); equals 1 iff the embeddings coincide."""
    if c <= 0:
        raise ConfigError(f"similarity scale must be positive, got {c}")
    diff = np.asarray(z_i, dtype=np.float64) - np.asarray(z_j, dtype=np.float64)
    return float(np.exp(-c * math.sqrt(math.fsum(d * d for d in diff))))


def _fsum_rows(rows, dim: int) -> np.ndarray:
    out = np.zeros(dim)
    for j in range(dim):
        out[j] = math.fsum(r[j] for r in rows)
    return out


def prototype_predict(
    history,
    z_query: np.ndarray,
    num_classes: int,
    c: float,
    literal_prefactor: bool = False,
) -> np.ndarray:
    """Class probabilities proportional to similarity with class prototypes.

    ``history`` holds (embedding, label) pairs for the completed steps; a
    class with no history items contributes a zero-vector prototype. With an
    empty history the prediction is uniform. ``literal_prefactor`` divides
    class sums by the full history length instead of the per-class count,
    which shrinks prototypes of rarely seen classes toward the origin.
    """
    z_query = np.asarray(z_query, dtype=np.float64)
    if not history:
        return np.full(num_classes, 1.0 / num_classes)
    dim = z_query.shape[0]
    sims = np.zeros(num_classes)
    for cls in range(1, num_classes + 1):
        members = [np.asarray(z, dtype=np.float64) for z, y in history if y == cls]
        if members:
            denom = len(history) if literal_prefactor else len(members)
            proto = _fsum_rows(members, dim) / denom
        else:
            proto = np.zeros(dim)
        sims[cls - 1] = similarity(proto, z_query, c)
    return sims / sims.sum()


def exemplar_predict(
    history, z_query: np.ndarray, num_classes: int, c: float, gamma: float = 1.0
) -> np.ndarray:
    """Class probabilities from summed exemplar similarities raised to gamma.

    Classes absent from the history have zero total similarity and therefore
    zero probability; an empty history yields the uniform distribution.
    """
    if gamma <= 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    z_query = np.asarray(z_query, dtype=np.float64)
    if not history:
        return np.full(num_classes, 1.0 / num_classes)
    totals = np.zeros(num_classes)
    for cls in range(1, num_classes + 1):
        sims = [similarity(z, z_query, c) for z, y in history if y == cls]
        totals[cls - 1] = math.fsum(sims)
    powered = np.where(totals > 0, totals**gamma, 0.0)
    return powered / powered.sum()

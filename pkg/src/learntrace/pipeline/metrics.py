"""Average precision scoring for response predictions.

Every (learner, step) contributes C scored instances: the predicted
probability of class c against the indicator "the learner's top choice was
c". Per-class AP pools one class across learners and steps, micro AP pools
everything, macro AP is the unweighted mean over classes that have at least
one positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError


def average_precision(scored) -> Optional[float]:
    """AP of (score, is_positive) pairs; ties keep input order (stable sort).

    Returns None when there are no positives (the class is then excluded
    from macro averaging).
    """
    scored = list(scored)
    if not scored:
        return None
    scores = np.asarray([s for s, _ in scored], dtype=np.float64)
    pos = np.asarray([bool(p) for _, p in scored])
    n_pos = int(pos.sum())
    if n_pos == 0:
        return None
    order = np.argsort(-scores, kind="stable")
    hits = pos[order]
    ranks = np.nonzero(hits)[0] + 1
    precisions = np.cumsum(hits)[hits.nonzero()] / ranks
    return float(precisions.sum() / n_pos)


@dataclass
class APReport:
    split: str  # "train_sequence" | "test_sequence"
    micro: float
    macro: float
    per_class: list  # one entry per class; None where the class had no positives
    micro_sd: Optional[float] = None
    macro_sd: Optional[float] = None
    n_runs: int = 1
    per_class_sd: Optional[list] = None

    def to_dict(self) -> dict:
        out = {
            "split": self.split,
            "micro": self.micro,
            "macro": self.macro,
            "per_class": self.per_class,
            "n_runs": self.n_runs,
        }
        if self.micro_sd is not None:
            out.update(micro_sd=self.micro_sd, macro_sd=self.macro_sd, per_class_sd=self.per_class_sd)
        return out


def ap_report_from_probs(probs: np.ndarray, responses: np.ndarray, split: str) -> APReport:
    """Score (K, S, C) probabilities against (K, S) observed top choices."""
    probs = np.asarray(probs)
    responses = np.asarray(responses)
    if probs.ndim != 3 or probs.shape[:2] != responses.shape:
        raise ConfigError(f"probs {probs.shape} vs responses {responses.shape}")
    k, s, c = probs.shape
    flat_scores = probs.reshape(k * s, c)
    flat_resp = responses.reshape(k * s)
    per_class = []
    micro_pairs = []
    for cls in range(1, c + 1):
        pairs = list(zip(flat_scores[:, cls - 1], flat_resp == cls))
        per_class.append(average_precision(pairs))
    # micro pools (learner, step, class) with class fastest, matching the
    # row-major flattening of the score matrix
    onehot = np.zeros((k * s, c), dtype=bool)
    onehot[np.arange(k * s), flat_resp - 1] = True
    micro_pairs = list(zip(flat_scores.reshape(-1), onehot.reshape(-1)))
    micro = average_precision(micro_pairs)
    macros = [a for a in per_class if a is not None]
    if micro is None or not macros:
        raise ConfigError("cannot score a split with no positive instances")
    return APReport(split=split, micro=micro, macro=float(np.mean(macros)), per_class=per_class)


def gt_label_probs(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """The parameter-free baseline: a one-hot at the true class of each step."""
    k, s = labels.shape
    out = np.zeros((k, s, num_classes))
    out[np.arange(k)[:, None], np.arange(s)[None, :], labels - 1] = 1.0
    return out


def aggregate_reports(reports) -> APReport:
    """Mean and standard deviation across repeated runs of the same split."""
    reports = list(reports)
    if not reports:
        raise ConfigError("no reports to aggregate")
    split = reports[0].split
    micros = np.asarray([r.micro for r in reports], dtype=np.float64)
    macros = np.asarray([r.macro for r in reports], dtype=np.float64)
    n_classes = len(reports[0].per_class)
    per_class, per_class_sd = [], []
    for c in range(n_classes):
        vals = [r.per_class[c] for r in reports if r.per_class[c] is not None]
        per_class.append(float(np.mean(vals)) if vals else None)
        per_class_sd.append(float(np.std(vals)) if vals else None)
    return APReport(
        split=split,
        micro=float(micros.mean()),
        macro=float(macros.mean()),
        per_class=per_class,
        micro_sd=float(micros.std()),
        macro_sd=float(macros.std()),
        per_class_sd=per_class_sd,
        n_runs=len(reports),
    )

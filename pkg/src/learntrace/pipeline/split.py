"""Learner-level splits: a session belongs to exactly one of train/val/test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

DEFAULT_FRACTIONS = (0.70, 0.133, 0.167)


@dataclass
class SplitAssignment:
    train: list
    val: list
    test: list

    def role_of(self, learner_id) -> str:
        for role in ("train", "val", "test"):
            if learner_id in getattr(self, role):
                return role
        raise KeyError(learner_id)

    def sizes(self) -> tuple:
        return (len(self.train), len(self.val), len(self.test))

    def all_ids(self) -> set:
        return set(self.train) | set(self.val) | set(self.test)


def split_learners(learner_ids, fractions=DEFAULT_FRACTIONS, seed: int = 0) -> SplitAssignment:
    """Deterministic partition: round for train, floor for val, remainder to
    test, with every split kept non-empty."""
    ids = sorted(set(learner_ids))
    n = len(ids)
    if n < 3:
        raise ConfigError(f"need at least 3 learners to split, got {n}")
    if len(set(learner_ids)) != len(list(learner_ids)):
        raise ConfigError("duplicate learner ids in split input")
    f_train, f_val, _ = fractions
    n_train = int(math.floor(f_train * n + 0.5))
    n_val = max(1, int(math.floor(f_val * n)))
    n_test = max(1, n - n_train - n_val)
    n_train = n - n_val - n_test
    if n_train < 1:
        raise ConfigError(f"split fractions leave no training learners for n={n}")
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [ids[i] for i in order]
    return SplitAssignment(
        train=shuffled[:n_train],
        val=shuffled[n_train : n_train + n_val],
        test=shuffled[n_train + n_val :],
    )


def split_sessions(sessions, assignment: SplitAssignment) -> dict:
    by_id = {s.learner_id: s for s in sessions}
    return {
        role: [by_id[i] for i in getattr(assignment, role)]
        for role in ("train", "val", "test")
    }

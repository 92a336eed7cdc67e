"""Bridging sessions and models: resolve item ids to raw model inputs and
pack sessions into aligned arrays."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..data.manifest import DatasetManifest
from ..data.sessions import LearnerSession
from ..encoder import EncoderConfig, preprocess
from ..errors import ConfigError
from ..tracers.model import CompiledBatch


class StimulusStore:
    """Maps item ids to feature vectors or preprocessed image tensors.

    Image decoding is cached per item, so repeated appearances across
    learners cost one decode.
    """

    def __init__(self, manifest: DatasetManifest, encoder_cfg: Optional[EncoderConfig] = None):
        self.manifest = manifest
        self.encoder_cfg = encoder_cfg
        self._cache: dict = {}
        if encoder_cfg is None:
            if not manifest.feature_names:
                raise ConfigError(
                    f"dataset {manifest.name!r} has no feature vectors; an encoder config is required"
                )
            self._features = {
                it.item_id: np.asarray(it.features, dtype=np.float64) for it in manifest.items
            }
        else:
            self._features = None

    @property
    def input_dim(self) -> Optional[int]:
        return self.manifest.feature_dim if self.encoder_cfg is None else None

    def input_for(self, item_id: str) -> np.ndarray:
        if self.encoder_cfg is None:
            return self._features[item_id]
        cached = self._cache.get(item_id)
        if cached is None:
            cached = preprocess(self.manifest.item_path(item_id), self.encoder_cfg)
            self._cache[item_id] = cached
        return cached


def compile_sessions(sessions, store: Optional[StimulusStore], dtype=np.float64) -> CompiledBatch:
    """Pack sessions into a CompiledBatch; ``store=None`` omits stimulus inputs
    (sufficient for models that never read them)."""
    sessions = list(sessions)
    if not sessions:
        raise ConfigError("cannot compile an empty session list")
    steps = len(sessions[0].interactions)
    labels = np.zeros((len(sessions), steps), dtype=int)
    responses = np.zeros((len(sessions), steps), dtype=int)
    inputs = None
    for k, session in enumerate(sessions):
        for t, it in enumerate(session.interactions):
            labels[k, t] = it.true_label
            responses[k, t] = it.top_choice
            if store is not None:
                x = store.input_for(it.item_id)
                if inputs is None:
                    inputs = np.zeros((len(sessions), steps) + x.shape, dtype=dtype)
                inputs[k, t] = x
    return CompiledBatch(
        labels=labels,
        responses=responses,
        inputs=inputs,
        learner_ids=[s.learner_id for s in sessions],
    )

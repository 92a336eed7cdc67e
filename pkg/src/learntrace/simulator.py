"""Synthetic non-stationary learners.

Each simulated learner is a linear classifier over a fixed 2-D internal
feature space. At every step it samples its top choice from a
temperature-scaled softmax read-out, receives the true label during the
feedback phase, and takes one online gradient ascent step on the
log-likelihood of that label. Test-phase weights are frozen. Because the
read-out is linear in a fixed feature space, a classifier-prediction tracer's
hypothesis class contains the ground truth, which is what makes recovery on
simulated populations a meaningful check.

The per-step true response distributions ("probes") are recorded alongside
the sessions; scoring them with the standard AP machinery gives the ceiling
no tracer can beat in expectation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data.greebles import FEATURE_NAMES as GREEBLE_FEATURES
from .data.manifest import DatasetManifest, ManifestItem
from .data.sessions import Interaction, LearnerSession
from .errors import ConfigError, IngestionError
from .pipeline.metrics import ap_report_from_probs
from .tracers.linear import softmax_np

INTERNAL_DIM = 2


@dataclass
class SimLearnerParams:
    weights: np.ndarray  # (C, 2) initial read-out
    learning_rate: float
    temperature: float
    feature_map: np.ndarray  # (2, F) fixed projection from recorded features
    seed: int

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")


@dataclass
class SimConfig:
    """Shipped default priors: initial read-outs with strong (often wrong)
    opinions and a two-decade learning-rate range, so populations mix fast
    learners, slow learners, and a stubborn tail. This yields negatively
    skewed test-correct histograms and leaves the per-learner headroom that
    history-conditioned tracers need to beat the static baseline."""

    num_learners: int = 150
    train_steps: int = 30
    test_steps: int = 15
    weight_sigma: float = 1.2
    lr_range: tuple = (0.02, 2.0)
    temp_range: tuple = (0.5, 2.0)
    seed: int = 0

    def __post_init__(self):
        if self.num_learners < 3:
            raise ConfigError("need at least 3 learners for downstream splitting")


@dataclass
class OracleProbe:
    learner_id: str
    probs: np.ndarray  # (steps, C) true response distributions


def default_stimuli(
    num_classes: int = 3, per_class: int = 400, spread: float = 0.5, seed: int = 0
) -> DatasetManifest:
    """A 2-D feature stimulus set with class clusters on the unit circle."""
    rng = np.random.default_rng(seed)
    angles = np.linspace(0, 2 * np.pi, num_classes, endpoint=False)
    means = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    items = []
    for cls in range(1, num_classes + 1):
        feats = means[cls - 1] + rng.normal(scale=spread, size=(per_class, 2))
        for j, f in enumerate(feats):
            items.append(
                ManifestItem(
                    item_id=f"stim_{cls}_{j:04d}",
                    label=cls,
                    features=[float(f[0]), float(f[1])],
                )
            )
    return DatasetManifest(
        name="sim2d",
        classes=[f"class_{c}" for c in range(1, num_classes + 1)],
        items=items,
        feature_names=["f0", "f1"],
    )


def feature_map_for(manifest: DatasetManifest, seed: int = 0) -> np.ndarray:
    """The fixed projection from recorded features to the internal space.

    2-D feature sets map through the identity. The synthetic-shape set maps
    onto its informative axes (body size; red minus green). Anything else
    gets a seeded random projection with unit-norm rows.
    """
    if not manifest.feature_names:
        raise ConfigError(f"dataset {manifest.name!r} records no generative features")
    f = manifest.feature_dim
    if f == INTERNAL_DIM:
        return np.eye(INTERNAL_DIM)
    if manifest.feature_names == list(GREEBLE_FEATURES):
        # centered informative axes: body size, red minus green; the offset
        # keeps initial read-out logits from being dominated by a fixed bias
        m = np.zeros((INTERNAL_DIM, f + 1))
        m[0, manifest.feature_names.index("body_size")] = 4.0
        m[0, f] = -2.0
        m[1, manifest.feature_names.index("red")] = 4.0
        m[1, manifest.feature_names.index("green")] = -4.0
        return m
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(INTERNAL_DIM, f))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def _project(feature_map: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Apply the internal projection; a map with one extra column treats it
    as an offset on an implicitly appended constant-1 feature."""
    f = features.shape[0]
    if feature_map.shape[1] == f + 1:
        return feature_map[:, :f] @ features + feature_map[:, f]
    return feature_map @ features


def sample_ranked_response(probs: np.ndarray, rng: np.random.Generator) -> tuple:
    """Top choice sampled from the distribution; ranks 2-3 are the remaining
    most probable classes in order (deterministic given the top choice)."""
    c = probs.shape[0]
    r1 = int(rng.choice(c, p=probs)) + 1
    rest = [int(k) + 1 for k in np.argsort(-probs, kind="stable") if int(k) + 1 != r1]
    return (r1, rest[0], rest[1]) if c >= 3 else (r1, rest[0])


def simulate_learner(
    params: SimLearnerParams,
    stimuli,
    dataset_name: str,
    learner_id: str,
    train_steps: int = 30,
    test_steps: int = 15,
) -> tuple:
    """Run one learner over a fixed stimulus sequence.

    Returns (LearnerSession, OracleProbe). Weights update only on feedback
    steps; the update is one gradient ascent step on log p(y | x) under the
    temperature-scaled read-out.
    """
    total = train_steps + test_steps
    if len(stimuli) != total:
        raise ConfigError(f"expected {total} stimuli, got {len(stimuli)}")
    rng = np.random.default_rng(params.seed)
    w = params.weights.astype(np.float64).copy()
    probs_log = np.zeros((total, w.shape[0]))
    interactions = []
    for t, item in enumerate(stimuli, start=1):
        phi = _project(params.feature_map, np.asarray(item.features, dtype=np.float64))
        p = softmax_np(w @ phi / params.temperature)
        probs_log[t - 1] = p
        response = sample_ranked_response(p, rng)
        interactions.append(
            Interaction(
                step=t,
                item_id=item.item_id,
                true_label=item.label,
                response=response,
                phase="train" if t <= train_steps else "test",
            )
        )
        if t <= train_steps:
            grad = (np.eye(w.shape[0])[item.label - 1] - p)[:, None] * phi[None, :]
            w += params.learning_rate * grad / params.temperature
    session = LearnerSession(
        learner_id=learner_id,
        dataset=dataset_name,
        interactions=interactions,
        client_seed=params.seed,
    )
    return session, OracleProbe(learner_id=learner_id, probs=probs_log)


def simulate_population(config: SimConfig, manifest: DatasetManifest) -> tuple:
    """Independent learners with per-learner seeds spawned from the master
    seed (SeedSequence.spawn); deterministic for a fixed config."""
    total = config.train_steps + config.test_steps
    if len(manifest.items) < total:
        raise ConfigError(
            f"stimulus set has {len(manifest.items)} items; {total} unique draws required"
        )
    fmap = feature_map_for(manifest)
    num_classes = manifest.num_classes
    children = np.random.SeedSequence(config.seed).spawn(config.num_learners)
    sessions, probes = [], []
    for k, child in enumerate(children):
        rng = np.random.default_rng(child)
        weights = rng.normal(scale=config.weight_sigma, size=(num_classes, INTERNAL_DIM))
        lr = float(np.exp(rng.uniform(np.log(config.lr_range[0]), np.log(config.lr_range[1]))))
        temp = float(rng.uniform(*config.temp_range))
        picks = rng.choice(len(manifest.items), size=total, replace=False)
        params = SimLearnerParams(
            weights=weights,
            learning_rate=lr,
            temperature=temp,
            feature_map=fmap,
            seed=int(rng.integers(0, 2**31 - 1)),
        )
        session, probe = simulate_learner(
            params,
            [manifest.items[i] for i in picks],
            manifest.name,
            learner_id=f"sim_{k:04d}",
            train_steps=config.train_steps,
            test_steps=config.test_steps,
        )
        sessions.append(session)
        probes.append(probe)
    return sessions, probes


def oracle_ap(probes, sessions, t_train: int = 30) -> dict:
    """Score the simulator's own response distributions like any model."""
    by_id = {p.learner_id: p for p in probes}
    probs = np.stack([by_id[s.learner_id].probs for s in sessions])
    responses = np.asarray([[it.top_choice for it in s.interactions] for s in sessions])
    return {
        "train_sequence": ap_report_from_probs(
            probs[:, :t_train], responses[:, :t_train], "train_sequence"
        ),
        "test_sequence": ap_report_from_probs(
            probs[:, t_train:], responses[:, t_train:], "test_sequence"
        ),
    }


def save_probes(path, probes) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in probes:
            fh.write(
                json.dumps({"learner_id": p.learner_id, "probs": p.probs.tolist()}) + "\n"
            )


def load_probes(path) -> list:
    probes = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                probes.append(
                    OracleProbe(
                        learner_id=str(raw["learner_id"]),
                        probs=np.asarray(raw["probs"], dtype=np.float64),
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise IngestionError(f"{path}:{lineno}: malformed probe record: {exc}") from exc
    return probes

"""Model scoring: AP on train/test sequences, probability traces over a probe
set, and the reshuffle protocol."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..data.manifest import DatasetManifest
from ..encoder import EncoderConfig
from ..errors import ConfigError
from ..tracers.model import TracerModel, TracerState
from ..tracers.variant import TracerVariant
from .dataset import StimulusStore, compile_sessions
from .metrics import APReport, aggregate_reports, ap_report_from_probs, gt_label_probs
from .split import split_learners, split_sessions
from .train import Hyperparams, train


def _chunks(seq, size):
    for i in range(0, len(seq), size):
        yield seq[i : i + size]


def session_probabilities(model: TracerModel, sessions, store, batch_size: int = 16) -> tuple:
    """Teacher-forced (K, 45, C) probabilities plus aligned responses/labels."""
    probs, responses, labels = [], [], []
    for group in _chunks(list(sessions), batch_size):
        batch = compile_sessions(group, store, dtype=model.dtype)
        probs.append(model.session_probs(batch))
        responses.append(batch.responses)
        labels.append(batch.labels)
    return np.concatenate(probs), np.concatenate(responses), np.concatenate(labels)


def evaluate_model(model: TracerModel, sessions, store, batch_size: int = 16) -> dict:
    """APReports for the feedback (train-sequence) and frozen-state
    (test-sequence) portions of held-out sessions."""
    if not sessions:
        raise ConfigError("cannot evaluate an empty session list")
    probs, responses, _ = session_probabilities(model, sessions, store, batch_size)
    t = model.t_train
    return {
        "train_sequence": ap_report_from_probs(probs[:, :t], responses[:, :t], "train_sequence"),
        "test_sequence": ap_report_from_probs(probs[:, t:], responses[:, t:], "test_sequence"),
    }


def gt_label_reports(sessions, num_classes: int, t_train: int = 30) -> dict:
    """The ground-truth-label baseline scored like any model."""
    if not sessions:
        raise ConfigError("cannot evaluate an empty session list")
    labels = np.asarray([[it.true_label for it in s.interactions] for s in sessions])
    responses = np.asarray([[it.top_choice for it in s.interactions] for s in sessions])
    probs = gt_label_probs(labels, num_classes)
    return {
        "train_sequence": ap_report_from_probs(
            probs[:, :t_train], responses[:, :t_train], "train_sequence"
        ),
        "test_sequence": ap_report_from_probs(
            probs[:, t_train:], responses[:, t_train:], "test_sequence"
        ),
    }


@dataclass
class ProbabilityTrace:
    """Per-class mean correct-class probability by time-step (1..45); the
    steps after the feedback phase repeat the frozen-state value."""

    classes: list
    means: np.ndarray  # (C, 45)
    sds: np.ndarray
    counts: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("class,step,mean_correct_prob,sd,count\n")
            for c, name in enumerate(self.classes):
                for t in range(self.means.shape[1]):
                    fh.write(
                        f"{name},{t + 1},{self.means[c, t]:.10f},"
                        f"{self.sds[c, t]:.10f},{int(self.counts[c, t])}\n"
                    )


def choose_probes(
    manifest: DatasetManifest, sessions, per_class: int = 50, seed: int = 0
) -> list:
    """Sample up to ``per_class`` probe items per class, preferring items the
    given sessions never showed."""
    used = {it.item_id for s in sessions for it in s.interactions}
    rng = np.random.default_rng(seed)
    probes = []
    for cls in range(1, manifest.num_classes + 1):
        fresh = [it for it in manifest.items if it.label == cls and it.item_id not in used]
        stale = [it for it in manifest.items if it.label == cls and it.item_id in used]
        pool = list(fresh)
        if len(pool) < per_class:
            pool += list(stale)
        take = min(per_class, len(pool))
        idx = rng.choice(len(pool), size=take, replace=False)
        probes.extend(pool[i] for i in idx)
    return probes


def _tile_state(state: TracerState, copies: int) -> TracerState:
    tiled = state.clone()
    tiled.batch = copies

    def rep(a):
        return None if a is None else np.repeat(a, copies, axis=0)

    tiled.hs = None if state.hs is None else [rep(h) for h in state.hs]
    tiled.cs = None if state.cs is None else [rep(c) for c in state.cs]
    tiled.prev_z = rep(state.prev_z)
    tiled.prev_label = None if state.prev_label is None else np.repeat(state.prev_label, copies)
    tiled.prev_response = (
        None if state.prev_response is None else np.repeat(state.prev_response, copies)
    )
    tiled.hits = rep(state.hits)
    tiled.seen = rep(state.seen)
    tiled.history = None if state.history is None else [list(state.history[0]) for _ in range(copies)]
    return tiled


def probability_trace(
    model: TracerModel,
    sessions,
    store,
    manifest: DatasetManifest,
    per_class: int = 50,
    seed: int = 0,
    t_total: int = 45,
) -> ProbabilityTrace:
    """Fig-style traces: at each step, each learner's model state predicts the
    probe set; the correct-class probabilities are pooled per (class, step)."""
    probes = choose_probes(manifest, sessions, per_class, seed)
    probe_labels = np.asarray([p.label for p in probes])
    if store is not None:
        probe_inputs = np.stack([store.input_for(p.item_id) for p in probes])
        if model.encoder_cfg is not None:
            probe_z = model.embed(probe_inputs).data
        else:
            probe_z = probe_inputs
    else:
        probe_z = np.zeros((len(probes), model.embed_dim))

    c = manifest.num_classes
    t_train = model.t_train
    sums = np.zeros((c, t_total))
    sqsums = np.zeros((c, t_total))
    counts = np.zeros((c, t_total))

    for session in sessions:
        state = model.init_state(1)
        step_values = []  # (probe values at each train step)
        for t in range(t_train):
            it = session.interactions[t]
            vals = _probe_values(model, state, probe_z, probe_labels)
            step_values.append(vals)
            emb = None
            if store is not None:
                raw = store.input_for(it.item_id)[None]
                emb = model.embed(raw).data if model.encoder_cfg is not None else raw
            state = model.advance(state, emb, [it.true_label], [it.top_choice])
        frozen_vals = _probe_values(model, state, probe_z, probe_labels)
        for t in range(t_total):
            vals = step_values[t] if t < t_train else frozen_vals
            for cls in range(1, c + 1):
                sel = vals[probe_labels == cls]
                sums[cls - 1, t] += sel.sum()
                sqsums[cls - 1, t] += (sel**2).sum()
                counts[cls - 1, t] += sel.size
    means = sums / np.maximum(counts, 1)
    var = np.maximum(sqsums / np.maximum(counts, 1) - means**2, 0.0)
    return ProbabilityTrace(
        classes=list(manifest.classes), means=means, sds=np.sqrt(var), counts=counts
    )


def _probe_values(model: TracerModel, state: TracerState, probe_z, probe_labels) -> np.ndarray:
    """Correct-class probability for every probe under one learner's state."""
    n = len(probe_labels)
    if model.variant.kind == "cls_pred":
        # one emitted classifier per distinct label serves all its probes
        vals = np.zeros(n)
        for cls in np.unique(probe_labels):
            w, b = model.emit(
                state,
                [int(cls)],
                probe_z[probe_labels == cls][:1] if model.variant.conditioning == "y_z" else None,
            )
            sel = probe_labels == cls
            logits = probe_z[sel] @ w[0].T + b[0]
            shifted = logits - logits.max(axis=1, keepdims=True)
            e = np.exp(shifted)
            vals[sel] = (e / e.sum(axis=1, keepdims=True))[:, int(cls) - 1]
        return vals
    tiled = _tile_state(state, n)
    probs = model.predict(tiled, probe_z, probe_labels)
    return probs[np.arange(n), probe_labels - 1]


def reshuffle_protocol(
    sessions,
    hp: Hyperparams,
    manifest: DatasetManifest,
    encoder_cfg: Optional[EncoderConfig] = None,
    variant: Optional[TracerVariant] = None,
) -> dict:
    """Train and evaluate over hp.reshuffles seeded splits; aggregate APs.

    Seeds are hp.seed + 0..reshuffles-1, applied to both the split and the
    model initialization, so the whole protocol is deterministic.
    """
    if variant is not None:
        hp = Hyperparams(**{**hp.__dict__, "variant": variant})
    per_split: dict = {"train_sequence": [], "test_sequence": []}
    reports = []
    for k in range(hp.reshuffles):
        run_hp = hp.with_seed(hp.seed + k)
        assignment = split_learners([s.learner_id for s in sessions], seed=run_hp.seed)
        model, report = train(sessions, run_hp, manifest, encoder_cfg, assignment)
        store = (
            StimulusStore(manifest, model.encoder_cfg) if model.variant.uses_embeddings else None
        )
        held_out = split_sessions(sessions, assignment)["test"]
        scores = evaluate_model(model, held_out, store, hp.batch_size)
        per_split["train_sequence"].append(scores["train_sequence"])
        per_split["test_sequence"].append(scores["test_sequence"])
        reports.append(report)
    return {
        "train_sequence": aggregate_reports(per_split["train_sequence"]),
        "test_sequence": aggregate_reports(per_split["test_sequence"]),
        "runs": reports,
    }

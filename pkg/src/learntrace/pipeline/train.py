"""Mini-batch training with learner-level splits and early stopping."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..autodiff import AdamState, Graph, adam_step, backward
from ..data.manifest import DatasetManifest
from ..encoder import EncoderConfig
from ..errors import ConfigError, NumericError
from ..tracers.model import TracerModel
from ..tracers.variant import TracerVariant
from .dataset import StimulusStore, compile_sessions
from .split import SplitAssignment, split_learners, split_sessions


@dataclass
class Hyperparams:
    variant: TracerVariant = field(default_factory=lambda: TracerVariant("static"))
    lr_encoder: float = 1e-5
    lr_head: float = 1e-3
    batch_size: int = 16
    patience: int = 35
    max_epochs: int = 400
    embed_dim: int = 16
    seed: int = 0
    reshuffles: int = 5
    dtype: str = "float64"

    def __post_init__(self):
        for name in ("lr_encoder", "lr_head", "batch_size", "patience", "max_epochs", "embed_dim"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.patience >= self.max_epochs:
            raise ConfigError("patience must be smaller than max_epochs")

    def with_seed(self, seed: int) -> "Hyperparams":
        return replace(self, seed=seed)


@dataclass
class TrainReport:
    train_loss: list
    val_loss: list
    best_epoch: int
    best_val_loss: float
    stop_reason: str  # "early_stop" | "max_epochs"
    epochs_run: int
    clamp_hits: int


def _chunks(seq, size):
    for i in range(0, len(seq), size):
        yield seq[i : i + size]


def _validation_loss(model: TracerModel, val_sessions, store, hp: Hyperparams) -> float:
    """Training objective evaluated on the validation learners' feedback steps."""
    from .loss import sequence_loss

    total, count = 0.0, 0
    for group in _chunks(val_sessions, hp.batch_size):
        batch = compile_sessions(group, store, dtype=model.dtype)
        probs = model.train_probs(batch).data
        total += sequence_loss(probs, batch.responses[:, : model.t_train]) * len(group)
        count += len(group)
    return total / count


def build_model(
    variant: TracerVariant,
    manifest: DatasetManifest,
    hp: Hyperparams,
    encoder_cfg: Optional[EncoderConfig] = None,
) -> TracerModel:
    """Feature datasets bypass the encoder: the embedding is the raw feature
    vector and embed_dim follows the data."""
    if encoder_cfg is None and variant.uses_embeddings:
        if not manifest.feature_names:
            raise ConfigError("dataset has no features; pass an encoder config for image datasets")
        embed_dim = manifest.feature_dim
    else:
        embed_dim = hp.embed_dim
    if encoder_cfg is not None and encoder_cfg.embed_dim != embed_dim:
        encoder_cfg = EncoderConfig(
            encoder_cfg.input_height, encoder_cfg.input_width, encoder_cfg.img_chns, embed_dim
        )
    return TracerModel.build(
        variant,
        num_classes=manifest.num_classes,
        embed_dim=embed_dim,
        encoder_cfg=encoder_cfg if variant.uses_embeddings else None,
        seed=hp.seed,
        dtype=np.dtype(hp.dtype),
    )


def train(
    sessions,
    hp: Hyperparams,
    manifest: DatasetManifest,
    encoder_cfg: Optional[EncoderConfig] = None,
    assignment: Optional[SplitAssignment] = None,
) -> tuple:
    """Fit hp.variant on the training learners; returns (model, report).

    The returned model carries the parameters of the best-validation epoch.
    Identical seeds and 64-bit mode reproduce the report exactly.
    """
    if assignment is None:
        assignment = split_learners([s.learner_id for s in sessions], seed=hp.seed)
    parts = split_sessions(sessions, assignment)
    model = build_model(hp.variant, manifest, hp, encoder_cfg)
    store = (
        StimulusStore(manifest, model.encoder_cfg) if model.variant.uses_embeddings else None
    )

    enc_params = model.encoder_params()
    head_params = model.head_params()
    opt_enc = AdamState(enc_params) if enc_params else None
    opt_head = AdamState(head_params)

    rng = np.random.default_rng(hp.seed)
    clamp_counter = [0]
    train_losses, val_losses = [], []
    best_val = np.inf
    best_epoch = 0
    best_snap = model.snapshot()
    stop_reason = "max_epochs"
    epoch = 0

    train_sessions = list(parts["train"])
    for epoch in range(1, hp.max_epochs + 1):
        order = rng.permutation(len(train_sessions))
        epoch_loss, seen = 0.0, 0
        for bi, rows in enumerate(_chunks(order, hp.batch_size)):
            group = [train_sessions[i] for i in rows]
            batch = compile_sessions(group, store, dtype=model.dtype)
            try:
                with Graph() as g:
                    loss = model.batch_loss(batch, clamp_counter=clamp_counter)
                if not np.isfinite(loss.data):
                    raise NumericError("loss is not finite")
                grads = backward(g, loss, params=model.all_params())
            except NumericError as exc:
                raise NumericError(f"epoch {epoch}, batch {bi}: {exc}") from exc
            if enc_params:
                adam_step(enc_params, grads, opt_enc, hp.lr_encoder)
            adam_step(head_params, grads, opt_head, hp.lr_head)
            epoch_loss += float(loss.data) * len(group)
            seen += len(group)
        train_losses.append(epoch_loss / seen)

        val = _validation_loss(model, parts["val"], store, hp)
        val_losses.append(val)
        if val < best_val:
            best_val = val
            best_epoch = epoch
            best_snap = model.snapshot()
        if epoch - best_epoch >= hp.patience:
            stop_reason = "early_stop"
            break

    model.restore(best_snap)
    report = TrainReport(
        train_loss=train_losses,
        val_loss=val_losses,
        best_epoch=best_epoch,
        best_val_loss=float(best_val),
        stop_reason=stop_reason,
        epochs_run=epoch,
        clamp_hits=clamp_counter[0],
    )
    return model, report

"""Per-step input vectors for the recurrent tracers.

Layouts (class indices are 1-based; one-hot blocks are zero when the source
value is absent, which covers the first time-step):

    direct   [onehot(prev response) | current embedding | onehot(current label)]
    cls_pred [prev embedding | onehot(prev response) | onehot(current label)]
    dkt      [onehot(prev label) | onehot(prev response) | onehot(current label)]

Conditioning controls the current-step blocks: ``base`` zeroes both the
current-label block and any current-embedding block, ``y`` keeps the label but
zeroes the current embedding, ``y_z`` keeps both (for cls_pred, ``y_z`` puts
the current embedding in the embedding slot instead of the previous one).
The optional per-class-accuracy vector is appended at the end.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..errors import ConfigError, ShapeError
from .variant import TracerVariant


def step_input_length(variant: TracerVariant, embed_dim: int, num_classes: int) -> int:
    base = 3 * num_classes if variant.kind == "dkt" else embed_dim + 2 * num_classes
    return base + (num_classes if variant.meta_per_class_acc else 0)


def _onehot(value: Optional[int], num_classes: int, dtype) -> np.ndarray:
    block = np.zeros(num_classes, dtype=dtype)
    if value is not None:
        if not 1 <= value <= num_classes:
            raise ShapeError(f"class index {value} outside [1, {num_classes}]")
        block[value - 1] = 1.0
    return block


def encode_step_input(
    variant: TracerVariant,
    num_classes: int,
    embed_dim: int,
    prev_embedding: Optional[np.ndarray] = None,
    prev_response: Optional[int] = None,
    prev_label: Optional[int] = None,
    cur_embedding: Optional[np.ndarray] = None,
    cur_label: Optional[int] = None,
    meta: Optional[np.ndarray] = None,
    dtype=np.float64,
) -> np.ndarray:
    """Assemble one step input; absent previous-interaction blocks are zeros."""
    if not variant.is_recurrent:
        raise ConfigError(f"step inputs are defined for recurrent kinds, not {variant.kind!r}")

    def emb_block(vec):
        if vec is None:
            return np.zeros(embed_dim, dtype=dtype)
        vec = np.asarray(vec, dtype=dtype)
        if vec.shape != (embed_dim,):
            raise ShapeError(f"embedding shape {vec.shape} != ({embed_dim},)")
        return vec

    cond = variant.conditioning
    if variant.kind == "direct":
        z_block = emb_block(cur_embedding if cond == "y_z" else None)
        y_block = _onehot(cur_label if cond != "base" else None, num_classes, dtype)
        parts = [_onehot(prev_response, num_classes, dtype), z_block, y_block]
    elif variant.kind == "cls_pred":
        z_block = emb_block(cur_embedding if cond == "y_z" else prev_embedding)
        y_block = _onehot(cur_label if cond != "base" else None, num_classes, dtype)
        parts = [z_block, _onehot(prev_response, num_classes, dtype), y_block]
    else:  # dkt: no embeddings anywhere in the input path
        parts = [
            _onehot(prev_label, num_classes, dtype),
            _onehot(prev_response, num_classes, dtype),
            _onehot(cur_label, num_classes, dtype),
        ]
    if variant.meta_per_class_acc:
        if meta is None:
            meta = np.zeros(num_classes, dtype=dtype)
        meta = np.asarray(meta, dtype=dtype)
        if meta.shape != (num_classes,):
            raise ShapeError(f"meta vector shape {meta.shape} != ({num_classes},)")
        parts.append(meta)
    return np.concatenate(parts)


def per_class_accuracy(history, num_classes: int) -> np.ndarray:
    """Accuracy per class over (label, response) pairs; unseen classes get 0."""
    seen = np.zeros(num_classes)
    hits = np.zeros(num_classes)
    for y, r in history:
        if not 1 <= y <= num_classes:
            raise ShapeError(f"class index {y} outside [1, {num_classes}]")
        seen[y - 1] += 1
        if r == y:
            hits[y - 1] += 1
    with np.errstate(invalid="ignore"):
        acc = np.where(seen > 0, hits / np.maximum(seen, 1), 0.0)
    return acc

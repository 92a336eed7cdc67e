"""Trainable tracer models.

One class covers all variants. The batched forward passes are built from
autodiff ops, so the same code serves training (inside a Graph) and
evaluation (no graph active, plain NumPy under the hood). A granular,
NumPy-only state API mirrors the per-step protocol: advance a learner's state
with a completed interaction, or query predictions/classifiers against a
state without mutating it. Test-phase queries are always evaluated
independently against the state frozen after the last feedback step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..autodiff import Tensor, ops
from ..autodiff.checkpoint import load_checkpoint, save_checkpoint
from ..autodiff.init import PRELU_GAIN, lstm_layer_params, prelu_slope, uniform_fan_in, zeros
from ..autodiff.ops import _stable_sigmoid
from ..encoder import EncoderConfig, encode, init_encoder_params
from ..errors import ConfigError, ShapeError
from .cognitive import exemplar_predict, prototype_predict
from .inputs import per_class_accuracy, step_input_length
from .linear import PredictedClassifier, softmax_np
from .variant import TracerVariant

TRAIN_STEPS = 30
TEST_STEPS = 15

HIDDEN_DIM = 128
NUM_LAYERS = 3
HEAD_HIDDEN = 64


@dataclass
class CompiledBatch:
    """Sessions as aligned arrays: labels/responses are (B, 45) 1-based; inputs
    are (B, 45, D) features or (B, 45, chns, H, W) images (None for dkt)."""

    labels: np.ndarray
    responses: np.ndarray
    inputs: Optional[np.ndarray]
    learner_ids: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.labels.shape[0]


@dataclass
class TracerState:
    """Batched per-learner state; ``step`` counts completed interactions."""

    step: int
    batch: int
    hs: Optional[list] = None  # per layer (B, H)
    cs: Optional[list] = None
    prev_z: Optional[np.ndarray] = None  # (B, D)
    prev_label: Optional[np.ndarray] = None  # (B,), 0 = absent
    prev_response: Optional[np.ndarray] = None
    history: Optional[list] = None  # per learner: [(z, y), ...]
    hits: Optional[np.ndarray] = None  # (B, C) meta accumulators
    seen: Optional[np.ndarray] = None

    def clone(self) -> "TracerState":
        return TracerState(
            step=self.step,
            batch=self.batch,
            hs=[h.copy() for h in self.hs] if self.hs is not None else None,
            cs=[c.copy() for c in self.cs] if self.cs is not None else None,
            prev_z=None if self.prev_z is None else self.prev_z.copy(),
            prev_label=None if self.prev_label is None else self.prev_label.copy(),
            prev_response=None if self.prev_response is None else self.prev_response.copy(),
            history=None if self.history is None else [list(h) for h in self.history],
            hits=None if self.hits is None else self.hits.copy(),
            seen=None if self.seen is None else self.seen.copy(),
        )


def _onehot_block(idx: np.ndarray, num_classes: int, dtype) -> np.ndarray:
    """One-hot over trailing class axis; index 0 encodes 'absent' (zero row)."""
    flat = idx.reshape(-1)
    out = np.zeros((flat.size, num_classes), dtype=dtype)
    present = flat > 0
    out[np.nonzero(present)[0], flat[present] - 1] = 1.0
    return out.reshape(idx.shape + (num_classes,))


class TracerModel:
    def __init__(
        self,
        variant: TracerVariant,
        num_classes: int,
        embed_dim: int,
        encoder_cfg: Optional[EncoderConfig],
        params: dict,
        dtype=np.float64,
        t_train: int = TRAIN_STEPS,
        hidden: int = HIDDEN_DIM,
        num_layers: int = NUM_LAYERS,
        head_hidden: int = HEAD_HIDDEN,
        seed: Optional[int] = None,
    ):
        if variant.kind == "dkt":
            encoder_cfg = None
        if encoder_cfg is not None and encoder_cfg.embed_dim != embed_dim:
            raise ConfigError("encoder embed_dim disagrees with model embed_dim")
        self.variant = variant
        self.num_classes = num_classes
        self.embed_dim = embed_dim
        self.encoder_cfg = encoder_cfg
        self.params = params
        self.dtype = np.dtype(dtype)
        self.t_train = t_train
        self.hidden = hidden
        self.num_layers = num_layers
        self.head_hidden = head_hidden
        self.seed = seed

    # ------------------------------------------------------------- build
    @classmethod
    def build(
        cls,
        variant: TracerVariant,
        num_classes: int,
        embed_dim: int,
        encoder_cfg: Optional[EncoderConfig] = None,
        seed: int = 0,
        dtype=np.float64,
        t_train: int = TRAIN_STEPS,
        hidden: int = HIDDEN_DIM,
        num_layers: int = NUM_LAYERS,
        head_hidden: int = HEAD_HIDDEN,
        gamma: Optional[float] = None,
    ) -> "TracerModel":
        if variant.kind == "prototype" and gamma not in (None, 1.0):
            raise ConfigError("the prototype model pins gamma to 1")
        rng = np.random.default_rng(seed)
        params: dict = {}
        c, d = num_classes, embed_dim
        if encoder_cfg is not None and variant.uses_embeddings:
            for name, p in init_encoder_params(encoder_cfg, rng, dtype).items():
                params[f"enc/{name}"] = p
        feat = d + (c if variant.meta_per_class_acc else 0)
        if variant.kind == "static":
            params["head/w"] = uniform_fan_in(rng, (feat, c), feat, dtype)
            params["head/b"] = zeros((c,), dtype)
        elif variant.kind == "static_time":
            params["head/w_tab"] = uniform_fan_in(rng, (t_train, d, c), d, dtype)
            params["head/b_tab"] = zeros((t_train, c), dtype)
        elif variant.is_recurrent:
            in_dim = step_input_length(variant, d, c)
            for li in range(num_layers):
                layer = lstm_layer_params(rng, in_dim if li == 0 else hidden, hidden, dtype)
                for k, v in layer.items():
                    params[f"lstm/l{li}/{k}"] = v
            out_dim = c * (d + 1) if variant.kind == "cls_pred" else c
            params["head/w1"] = uniform_fan_in(rng, (hidden, head_hidden), hidden, dtype, gain=PRELU_GAIN)
            params["head/b1"] = zeros((head_hidden,), dtype)
            params["head/a1"] = prelu_slope(dtype)
            params["head/w2"] = uniform_fan_in(rng, (head_hidden, out_dim), head_hidden, dtype)
            params["head/b2"] = zeros((out_dim,), dtype)
        else:  # prototype / exemplar
            params["cog/log_c"] = Tensor(np.asarray(0.0, dtype=dtype), requires_grad=True)
            if variant.kind == "exemplar":
                g0 = 1.0 if gamma is None else float(gamma)
                params["cog/log_gamma"] = Tensor(
                    np.asarray(np.log(g0), dtype=dtype), requires_grad=True
                )
        return cls(
            variant, num_classes, embed_dim, encoder_cfg, params,
            dtype=dtype, t_train=t_train, hidden=hidden,
            num_layers=num_layers, head_hidden=head_hidden, seed=seed,
        )

    # ------------------------------------------------------------- params
    def encoder_params(self) -> list:
        return [v for k, v in self.params.items() if k.startswith("enc/")]

    def head_params(self) -> list:
        return [v for k, v in self.params.items() if not k.startswith("enc/")]

    def all_params(self) -> list:
        return list(self.params.values())

    def _lstm_layers(self) -> list:
        return [
            {
                "w_ih": self.params[f"lstm/l{li}/w_ih"],
                "w_hh": self.params[f"lstm/l{li}/w_hh"],
                "b": self.params[f"lstm/l{li}/b"],
            }
            for li in range(self.num_layers)
        ]

    def snapshot(self) -> dict:
        return {k: v.data.copy() for k, v in self.params.items()}

    def restore(self, snap: dict) -> None:
        for k, v in self.params.items():
            v.data = snap[k].copy()

    # ------------------------------------------------------------- embedding
    def embed(self, inputs: np.ndarray) -> Tensor:
        """Raw step inputs (N, D) features or (N, chns, H, W) images -> (N, D)."""
        if self.encoder_cfg is None:
            arr = np.asarray(inputs, dtype=self.dtype)
            if arr.shape[-1] != self.embed_dim:
                raise ShapeError(
                    f"feature dim {arr.shape[-1]} != embed_dim {self.embed_dim}"
                )
            return Tensor(arr)
        enc = {k[len("enc/"):]: v for k, v in self.params.items() if k.startswith("enc/")}
        return encode(Tensor(np.asarray(inputs, dtype=self.dtype)), self.encoder_cfg, enc)

    @property
    def needs_embeddings(self) -> bool:
        """False when no code path reads the stimulus (dkt always; the direct
        model under base/y conditioning feeds a zero embedding block)."""
        if not self.variant.uses_embeddings:
            return False
        return not (self.variant.kind == "direct" and self.variant.conditioning != "y_z")

    def _embed_steps(self, batch: CompiledBatch, step_slice) -> Optional[Tensor]:
        """Embeddings for a span of steps as a (B, n, D) tensor."""
        if not self.needs_embeddings:
            return None
        if batch.inputs is None:
            raise ConfigError(f"variant {self.variant.kind!r} needs stimulus inputs")
        sub = batch.inputs[:, step_slice]
        b, n = sub.shape[0], sub.shape[1]
        flat = sub.reshape((b * n,) + sub.shape[2:])
        z = self.embed(flat)
        return ops.reshape(z, (b, n, self.embed_dim))

    # ------------------------------------------------------------- meta input
    def _meta_matrix(self, batch: CompiledBatch) -> np.ndarray:
        """(B, 45, C) per-class accuracy over feedback steps before each step;
        test steps all use the full 30-step history (frozen protocol)."""
        b, s = batch.labels.shape
        c = self.num_classes
        out = np.zeros((b, s, c), dtype=self.dtype)
        hits = np.zeros((b, c))
        seen = np.zeros((b, c))
        rows = np.arange(b)
        frozen = None
        for t in range(s):
            acc = np.where(seen > 0, hits / np.maximum(seen, 1), 0.0)
            if t < self.t_train:
                out[:, t] = acc
                y = batch.labels[:, t] - 1
                seen[rows, y] += 1
                hits[rows, y] += batch.responses[:, t] == batch.labels[:, t]
            else:
                if frozen is None:
                    frozen = np.where(seen > 0, hits / np.maximum(seen, 1), 0.0)
                out[:, t] = frozen
        return out

    # ------------------------------------------------------------- forwards
    def _linear_probs(self, z: Tensor, meta: Optional[np.ndarray]) -> Tensor:
        b, n, _ = z.data.shape
        feats = z
        if self.variant.meta_per_class_acc:
            feats = ops.concat([z, Tensor(np.asarray(meta, dtype=self.dtype))], axis=2)
        flat = ops.reshape(feats, (b * n, feats.data.shape[2]))
        logits = ops.affine(flat, self.params["head/w"], self.params["head/b"])
        return ops.softmax(ops.reshape(logits, (b, n, self.num_classes)))

    def _time_table_probs(self, z: Tensor, steps: np.ndarray) -> Tensor:
        """Per-step classifiers gathered at 1-based ``steps`` (same for all
        learners in the batch)."""
        idx = np.asarray(steps) - 1
        w_tab = ops.slice_(self.params["head/w_tab"], idx)  # (n, D, C)
        b_tab = ops.slice_(self.params["head/b_tab"], idx)  # (n, C)
        b, n, d = z.data.shape
        zx = ops.reshape(z, (b, n, d, 1))
        w4 = ops.reshape(w_tab, (1, n, d, self.num_classes))
        logits = ops.sum_(ops.mul(zx, w4), axis=2)
        logits = ops.add(logits, ops.reshape(b_tab, (1, n, self.num_classes)))
        return ops.softmax(logits)

    def _recurrent_inputs(
        self,
        z: Optional[Tensor],
        labels: np.ndarray,
        prev_labels: np.ndarray,
        prev_responses: np.ndarray,
        prev_z: Optional[Tensor],
        meta: Optional[np.ndarray],
    ) -> Tensor:
        """Assemble (B, n, I) step inputs from aligned blocks (0 index = absent)."""
        c, dt = self.num_classes, self.dtype
        kind, cond = self.variant.kind, self.variant.conditioning
        prev_r = Tensor(_onehot_block(prev_responses, c, dt))
        y_blk = Tensor(_onehot_block(labels if cond != "base" else np.zeros_like(labels), c, dt))
        b, n = labels.shape
        zeros_z = Tensor(np.zeros((b, n, self.embed_dim), dtype=dt))
        if kind == "direct":
            z_blk = z if cond == "y_z" else zeros_z
            parts = [prev_r, z_blk, y_blk]
        elif kind == "cls_pred":
            z_blk = z if cond == "y_z" else (prev_z if prev_z is not None else zeros_z)
            parts = [z_blk, prev_r, y_blk]
        else:  # dkt
            parts = [Tensor(_onehot_block(prev_labels, c, dt)), prev_r,
                     Tensor(_onehot_block(labels, c, dt))]
        if self.variant.meta_per_class_acc:
            parts.append(Tensor(np.asarray(meta, dtype=dt)))
        return ops.concat(parts, axis=2)

    def _shift_z(self, z: Tensor) -> Tensor:
        b, n, d = z.data.shape
        lead = Tensor(np.zeros((b, 1, d), dtype=self.dtype))
        return ops.concat([lead, ops.slice_(z, np.s_[:, : n - 1, :])], axis=1)

    def _head(self, flat: Tensor) -> Tensor:
        h = ops.affine(flat, self.params["head/w1"], self.params["head/b1"])
        h = ops.prelu(h, self.params["head/a1"])
        return ops.affine(h, self.params["head/w2"], self.params["head/b2"])

    def _clspred_probs(self, head_out: Tensor, z: Tensor, b: int, n: int) -> Tensor:
        c, d = self.num_classes, self.embed_dim
        ho = ops.reshape(head_out, (b, n, c * (d + 1)))
        w = ops.reshape(ops.slice_(ho, np.s_[:, :, : c * d]), (b, n, c, d))
        bias = ops.slice_(ho, np.s_[:, :, c * d :])
        zq = ops.reshape(z, (b, n, 1, d))
        logits = ops.add(ops.sum_(ops.mul(w, zq), axis=3), bias)
        return ops.softmax(logits)

    def _cognitive_sequence_probs(self, z: Tensor, labels: np.ndarray) -> Tensor:
        """Teacher-forced prototype/exemplar probabilities over one batch."""
        b, n, d = z.data.shape
        c = self.num_classes
        c_scale = ops.exp(self.params["cog/log_c"])
        gamma = (
            ops.exp(self.params["cog/log_gamma"]) if self.variant.kind == "exemplar" else None
        )
        uniform = Tensor(np.full((1, c), 1.0 / c, dtype=self.dtype))
        rows_all = []
        for k in range(b):
            zk = ops.slice_(z, np.s_[k])  # (n, D)
            rows = [uniform]
            for tau in range(1, n):
                hist = ops.slice_(zk, np.s_[:tau])  # (tau, D)
                zq = ops.reshape(ops.slice_(zk, np.s_[tau]), (1, d))
                ind = _onehot_block(labels[k, :tau], c, self.dtype).T  # (C, tau)
                if self.variant.kind == "prototype":
                    counts = ind.sum(axis=1, keepdims=True)
                    m = ind / np.maximum(counts, 1.0)
                    protos = ops.matmul(Tensor(m), hist)  # (C, D)
                    diff = ops.sub(protos, zq)
                    dist = ops.sqrt(ops.sum_(ops.mul(diff, diff), axis=1))
                    sims = ops.exp(ops.scale(ops.mul(dist, c_scale), -1.0))
                    row = ops.div(sims, ops.sum_(sims))
                else:
                    diff = ops.sub(hist, zq)
                    dist = ops.sqrt(ops.sum_(ops.mul(diff, diff), axis=1))
                    sims = ops.exp(ops.scale(ops.mul(dist, c_scale), -1.0))
                    totals = ops.reshape(
                        ops.matmul(Tensor(ind), ops.reshape(sims, (tau, 1))), (c,)
                    )
                    powered = ops.power(totals, gamma)
                    row = ops.div(powered, ops.sum_(powered))
                rows.append(ops.reshape(row, (1, c)))
            rows_all.append(ops.reshape(ops.concat(rows, axis=0), (1, n, c)))
        return ops.concat(rows_all, axis=0) if b > 1 else rows_all[0]

    def train_probs(self, batch: CompiledBatch) -> Tensor:
        """Teacher-forced probabilities for the feedback steps: (B, 30, C)."""
        t = self.t_train
        labels = batch.labels[:, :t]
        responses = batch.responses[:, :t]
        meta = self._meta_matrix(batch)[:, :t] if self.variant.meta_per_class_acc else None
        z = self._embed_steps(batch, np.s_[:t])
        kind = self.variant.kind
        if kind == "static":
            return self._linear_probs(z, meta)
        if kind == "static_time":
            return self._time_table_probs(z, np.arange(1, t + 1))
        if kind in ("prototype", "exemplar"):
            return self._cognitive_sequence_probs(z, labels)
        b, n = labels.shape
        prev_labels = np.concatenate([np.zeros((b, 1), dtype=int), labels[:, :-1]], axis=1)
        prev_resp = np.concatenate([np.zeros((b, 1), dtype=int), responses[:, :-1]], axis=1)
        prev_z = self._shift_z(z) if (kind == "cls_pred" and self.variant.conditioning != "y_z") else None
        x = self._recurrent_inputs(z, labels, prev_labels, prev_resp, prev_z, meta)
        outputs, _ = ops.lstm_forward(x, params=self._lstm_layers())
        flat = ops.reshape(outputs, (b * n, self.hidden))
        head_out = self._head(flat)
        if kind == "cls_pred":
            return self._clspred_probs(head_out, z, b, n)
        return ops.softmax(ops.reshape(head_out, (b, n, self.num_classes)))

    def test_probs(self, batch: CompiledBatch) -> Tensor:
        """Frozen-state probabilities for the no-feedback steps: (B, 15, C).

        Each test query is evaluated independently against the state after
        the final feedback step; the state is never advanced by a query.
        """
        t = self.t_train
        n_test = batch.labels.shape[1] - t
        labels_q = batch.labels[:, t:]
        z_q = self._embed_steps(batch, np.s_[t:])
        kind = self.variant.kind
        if kind == "static":
            meta = self._meta_matrix(batch)[:, t:] if self.variant.meta_per_class_acc else None
            return self._linear_probs(z_q, meta)
        if kind == "static_time":
            return self._time_table_probs(z_q, np.full(n_test, t))
        if kind in ("prototype", "exemplar"):
            z_h = self._embed_steps(batch, np.s_[:t])
            return self._cognitive_test_probs(z_h, batch.labels[:, :t], z_q)
        return self._recurrent_test_probs(batch, z_q, labels_q)

    def _cognitive_test_probs(self, z_hist: Tensor, hist_labels, z_q: Tensor) -> Tensor:
        b, n_test, d = z_q.data.shape
        c = self.num_classes
        c_scale = ops.exp(self.params["cog/log_c"])
        gamma = (
            ops.exp(self.params["cog/log_gamma"]) if self.variant.kind == "exemplar" else None
        )
        rows_all = []
        for k in range(b):
            hist = ops.slice_(z_hist, np.s_[k])
            ind = _onehot_block(hist_labels[k], c, self.dtype).T
            rows = []
            for s in range(n_test):
                zq = ops.reshape(ops.slice_(z_q, np.s_[k, s]), (1, d))
                if self.variant.kind == "prototype":
                    m = ind / np.maximum(ind.sum(axis=1, keepdims=True), 1.0)
                    protos = ops.matmul(Tensor(m), hist)
                    diff = ops.sub(protos, zq)
                    dist = ops.sqrt(ops.sum_(ops.mul(diff, diff), axis=1))
                    sims = ops.exp(ops.scale(ops.mul(dist, c_scale), -1.0))
                    row = ops.div(sims, ops.sum_(sims))
                else:
                    diff = ops.sub(hist, zq)
                    dist = ops.sqrt(ops.sum_(ops.mul(diff, diff), axis=1))
                    sims = ops.exp(ops.scale(ops.mul(dist, c_scale), -1.0))
                    totals = ops.reshape(
                        ops.matmul(Tensor(ind), ops.reshape(sims, (hist.data.shape[0], 1))), (c,)
                    )
                    powered = ops.power(totals, gamma)
                    row = ops.div(powered, ops.sum_(powered))
                rows.append(ops.reshape(row, (1, c)))
            rows_all.append(ops.reshape(ops.concat(rows, axis=0), (1, n_test, c)))
        return ops.concat(rows_all, axis=0) if b > 1 else rows_all[0]

    def _recurrent_test_probs(self, batch: CompiledBatch, z_q, labels_q) -> Tensor:
        t = self.t_train
        b = batch.size
        n_test = labels_q.shape[1]
        labels = batch.labels[:, :t]
        responses = batch.responses[:, :t]
        meta_all = self._meta_matrix(batch) if self.variant.meta_per_class_acc else None
        z = self._embed_steps(batch, np.s_[:t])
        prev_labels = np.concatenate([np.zeros((b, 1), dtype=int), labels[:, :-1]], axis=1)
        prev_resp = np.concatenate([np.zeros((b, 1), dtype=int), responses[:, :-1]], axis=1)
        prev_z = (
            self._shift_z(z)
            if (self.variant.kind == "cls_pred" and self.variant.conditioning != "y_z")
            else None
        )
        meta_train = meta_all[:, :t] if meta_all is not None else None
        x = self._recurrent_inputs(z, labels, prev_labels, prev_resp, prev_z, meta_train)
        _, finals = ops.lstm_forward(x, params=self._lstm_layers())

        kind = self.variant.kind
        last_r = responses[:, -1:]
        last_y = labels[:, -1:]
        z_last = ops.slice_(z, np.s_[:, t - 1 : t, :]) if z is not None else None
        rows = []
        layers = self._lstm_layers()
        for s in range(n_test):
            zq_s = ops.slice_(z_q, np.s_[:, s : s + 1, :]) if z_q is not None else None
            meta_s = meta_all[:, t + s : t + s + 1] if meta_all is not None else None
            if kind == "cls_pred" and self.variant.conditioning != "y_z":
                prev_z_s = z_last
            else:
                prev_z_s = None
            xq = self._recurrent_inputs(
                zq_s if kind != "dkt" else None,
                labels_q[:, s : s + 1],
                last_y,
                last_r,
                prev_z_s,
                meta_s,
            )
            inp = ops.reshape(xq, (b, xq.data.shape[2]))
            hs = [f[0] for f in finals]
            cs = [f[1] for f in finals]
            out = inp
            for li, layer in enumerate(layers):
                h, _ = ops.lstm_cell(out, hs[li], cs[li], layer["w_ih"], layer["w_hh"], layer["b"])
                out = h
            head_out = self._head(out)
            if kind == "cls_pred":
                zq_flat = ops.reshape(zq_s, (b, 1, self.embed_dim))
                probs = self._clspred_probs(head_out, zq_flat, b, 1)
            else:
                probs = ops.softmax(ops.reshape(head_out, (b, 1, self.num_classes)))
            rows.append(probs)
        return ops.concat(rows, axis=1)

    def session_probs(self, batch: CompiledBatch) -> np.ndarray:
        """(B, 45, C) teacher-forced probabilities for whole sessions."""
        return np.concatenate(
            [self.train_probs(batch).data, self.test_probs(batch).data], axis=1
        )

    def batch_loss(self, batch: CompiledBatch, clamp_counter: Optional[list] = None) -> Tensor:
        probs = self.train_probs(batch)
        targets = batch.responses[:, : self.t_train] - 1
        return ops.cross_entropy(probs, targets, clamp_counter=clamp_counter)

    # ------------------------------------------------------------- state API
    def init_state(self, batch_size: int = 1) -> TracerState:
        state = TracerState(step=0, batch=batch_size)
        if self.variant.is_recurrent:
            state.hs = [np.zeros((batch_size, self.hidden), dtype=self.dtype) for _ in range(self.num_layers)]
            state.cs = [np.zeros((batch_size, self.hidden), dtype=self.dtype) for _ in range(self.num_layers)]
        if self.variant.kind in ("prototype", "exemplar"):
            state.history = [[] for _ in range(batch_size)]
        state.prev_z = np.zeros((batch_size, self.embed_dim), dtype=self.dtype)
        state.prev_label = np.zeros(batch_size, dtype=int)
        state.prev_response = np.zeros(batch_size, dtype=int)
        state.hits = np.zeros((batch_size, self.num_classes))
        state.seen = np.zeros((batch_size, self.num_classes))
        return state

    def _np_lstm_step(self, hs, cs, x):
        out = x
        new_hs, new_cs = [], []
        h4 = self.hidden
        for li in range(self.num_layers):
            w_ih = self.params[f"lstm/l{li}/w_ih"].data
            w_hh = self.params[f"lstm/l{li}/w_hh"].data
            b = self.params[f"lstm/l{li}/b"].data
            gates = out @ w_ih + hs[li] @ w_hh + b
            i = _stable_sigmoid(gates[:, :h4])
            f = _stable_sigmoid(gates[:, h4 : 2 * h4])
            g = np.tanh(gates[:, 2 * h4 : 3 * h4])
            o = _stable_sigmoid(gates[:, 3 * h4 :])
            c_new = f * cs[li] + i * g
            out = o * np.tanh(c_new)
            new_hs.append(out)
            new_cs.append(c_new)
        return new_hs, new_cs, out

    def _np_head(self, top: np.ndarray) -> np.ndarray:
        h = top @ self.params["head/w1"].data + self.params["head/b1"].data
        a = float(self.params["head/a1"].data)
        h = np.where(h < 0, a * h, h)
        return h @ self.params["head/w2"].data + self.params["head/b2"].data

    def _np_step_inputs(self, state: TracerState, cur_z, cur_labels) -> np.ndarray:
        c, dt = self.num_classes, self.dtype
        cond = self.variant.conditioning
        kind = self.variant.kind
        b = state.batch
        prev_r = _onehot_block(state.prev_response, c, dt)
        zeros_z = np.zeros((b, self.embed_dim), dtype=dt)
        y_blk = (
            _onehot_block(np.asarray(cur_labels), c, dt)
            if cond != "base"
            else np.zeros((b, c), dtype=dt)
        )
        if kind == "direct":
            z_blk = np.asarray(cur_z, dtype=dt) if cond == "y_z" else zeros_z
            parts = [prev_r, z_blk, y_blk]
        elif kind == "cls_pred":
            z_blk = np.asarray(cur_z, dtype=dt) if cond == "y_z" else state.prev_z
            parts = [z_blk, prev_r, y_blk]
        else:
            parts = [
                _onehot_block(state.prev_label, c, dt),
                prev_r,
                _onehot_block(np.asarray(cur_labels), c, dt),
            ]
        if self.variant.meta_per_class_acc:
            acc = np.where(state.seen > 0, state.hits / np.maximum(state.seen, 1), 0.0)
            parts.append(acc.astype(dt))
        return np.concatenate(parts, axis=1)

    def advance(self, state: TracerState, embeddings, labels, responses) -> TracerState:
        """Fold one completed interaction per learner into a new state."""
        new = state.clone()
        labels = np.asarray(labels, dtype=int)
        responses = np.asarray(responses, dtype=int)
        if self.variant.is_recurrent:
            x = self._np_step_inputs(state, embeddings, labels)
            new.hs, new.cs, _ = self._np_lstm_step(state.hs, state.cs, x)
        if new.history is not None:
            z = np.asarray(embeddings, dtype=self.dtype)
            for k in range(new.batch):
                new.history[k].append((z[k].copy(), int(labels[k])))
        rows = np.arange(new.batch)
        new.seen[rows, labels - 1] += 1
        new.hits[rows, labels - 1] += responses == labels
        if embeddings is not None:
            new.prev_z = np.asarray(embeddings, dtype=self.dtype).copy()
        new.prev_label = labels.copy()
        new.prev_response = responses.copy()
        new.step += 1
        return new

    def predict(self, state: TracerState, embeddings, labels) -> np.ndarray:
        """Response distribution per learner for a query; state is untouched."""
        kind = self.variant.kind
        labels = np.asarray(labels, dtype=int)
        if kind == "static":
            feats = np.asarray(embeddings, dtype=self.dtype)
            if self.variant.meta_per_class_acc:
                acc = np.where(state.seen > 0, state.hits / np.maximum(state.seen, 1), 0.0)
                feats = np.concatenate([feats, acc], axis=1)
            return softmax_np(feats @ self.params["head/w"].data + self.params["head/b"].data)
        if kind == "static_time":
            t = min(state.step + 1, self.t_train)
            w = self.params["head/w_tab"].data[t - 1]
            b = self.params["head/b_tab"].data[t - 1]
            return softmax_np(np.asarray(embeddings, dtype=self.dtype) @ w + b)
        if kind in ("prototype", "exemplar"):
            c_scale = float(np.exp(self.params["cog/log_c"].data))
            gamma = (
                float(np.exp(self.params["cog/log_gamma"].data)) if kind == "exemplar" else 1.0
            )
            z = np.asarray(embeddings, dtype=self.dtype)
            out = np.zeros((state.batch, self.num_classes))
            for k in range(state.batch):
                if kind == "prototype":
                    out[k] = prototype_predict(state.history[k], z[k], self.num_classes, c_scale)
                else:
                    out[k] = exemplar_predict(state.history[k], z[k], self.num_classes, c_scale, gamma)
            return out
        if kind == "cls_pred":
            w, b = self.emit(state, labels, embeddings)
            z = np.asarray(embeddings, dtype=self.dtype)
            logits = np.einsum("bcd,bd->bc", w, z) + b
            return softmax_np(logits)
        x = self._np_step_inputs(state, embeddings, labels)
        _, _, top = self._np_lstm_step(state.hs, state.cs, x)
        return softmax_np(self._np_head(top))

    def emit(self, state: TracerState, labels, embeddings=None):
        """Per-learner (w, b) classifier read-outs from the current state.

        Independent of the query embedding except under y_z conditioning,
        where the current embedding occupies the input's embedding slot.
        """
        if self.variant.kind != "cls_pred":
            raise ConfigError(f"emit is defined for cls_pred, not {self.variant.kind!r}")
        if self.variant.conditioning == "y_z" and embeddings is None:
            raise ConfigError("y_z conditioning requires the query embedding to emit")
        x = self._np_step_inputs(state, embeddings, np.asarray(labels, dtype=int))
        _, _, top = self._np_lstm_step(state.hs, state.cs, x)
        out = self._np_head(top)
        c, d = self.num_classes, self.embed_dim
        w = out[:, : c * d].reshape(state.batch, c, d)
        b = out[:, c * d :]
        return w, b

    def emit_classifier(self, state: TracerState, label: int, embedding=None) -> PredictedClassifier:
        """Single-learner convenience wrapper around :meth:`emit`."""
        w, b = self.emit(state, np.asarray([label]), None if embedding is None else embedding[None])
        return PredictedClassifier(w=w[0], b=b[0])

    # ------------------------------------------------------------- persistence
    def save(self, path, extra_meta: Optional[dict] = None) -> None:
        meta = {
            "format": "tracer-checkpoint",
            "variant": self.variant.describe(),
            "num_classes": self.num_classes,
            "embed_dim": self.embed_dim,
            "hidden": self.hidden,
            "num_layers": self.num_layers,
            "head_hidden": self.head_hidden,
            "t_train": self.t_train,
            "dtype": str(self.dtype),
            "seed": self.seed,
            "encoder": None
            if self.encoder_cfg is None
            else {
                "input_height": self.encoder_cfg.input_height,
                "input_width": self.encoder_cfg.input_width,
                "img_chns": self.encoder_cfg.img_chns,
                "embed_dim": self.encoder_cfg.embed_dim,
            },
        }
        if extra_meta:
            meta.update(extra_meta)
        save_checkpoint(path, {k: v.data for k, v in self.params.items()}, meta)

    @classmethod
    def load(cls, path) -> "TracerModel":
        arrays, meta = load_checkpoint(path)
        variant = TracerVariant.from_dict(meta["variant"])
        enc = meta.get("encoder")
        encoder_cfg = EncoderConfig(**enc) if enc else None
        params = {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}
        return cls(
            variant,
            num_classes=meta["num_classes"],
            embed_dim=meta["embed_dim"],
            encoder_cfg=encoder_cfg,
            params=params,
            dtype=np.dtype(meta["dtype"]),
            t_train=meta["t_train"],
            hidden=meta["hidden"],
            num_layers=meta["num_layers"],
            head_hidden=meta["head_hidden"],
            seed=meta.get("seed"),
        )

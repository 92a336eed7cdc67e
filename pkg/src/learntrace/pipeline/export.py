"""Dump recurrent model internals for offline analysis (e.g. 2-D projections
of hidden trajectories): per-(learner, step, layer) hidden/cell rows, plus
the emitted per-step classifiers for the classifier-prediction variant."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..tracers.model import TracerModel


def export_states(model: TracerModel, sessions, store, out_dir) -> dict:
    """Write states.csv (and classifiers.csv for cls_pred); returns the paths.

    Rows cover the feedback phase: the state recorded after each advance.
    Re-running the export writes identical bytes.
    """
    if not model.variant.is_recurrent:
        raise ConfigError(f"state export requires a recurrent variant, not {model.variant.kind!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    states_path = out_dir / "states.csv"
    cls_path = out_dir / "classifiers.csv"
    emit_classifiers = model.variant.kind == "cls_pred"

    with open(states_path, "w", encoding="utf-8") as sf:
        cf = open(cls_path, "w", encoding="utf-8") if emit_classifiers else None
        header = ",".join(f"v{i}" for i in range(model.hidden))
        sf.write(f"learner_id,step,layer,kind,{header}\n")
        if cf:
            width = model.num_classes * (model.embed_dim + 1)
            cf.write("learner_id,step," + ",".join(f"v{i}" for i in range(width)) + "\n")
        try:
            for session in sessions:
                state = model.init_state(1)
                for t in range(model.t_train):
                    it = session.interactions[t]
                    emb = None
                    if model.needs_embeddings:
                        raw = store.input_for(it.item_id)[None]
                        emb = model.embed(raw).data if model.encoder_cfg is not None else raw
                    if cf:
                        w, b = model.emit(
                            state,
                            [it.true_label],
                            emb if model.variant.conditioning == "y_z" else None,
                        )
                        flat = np.concatenate([w[0].reshape(-1), b[0]])
                        cf.write(
                            f"{session.learner_id},{t + 1},"
                            + ",".join(f"{v:.10e}" for v in flat)
                            + "\n"
                        )
                    state = model.advance(state, emb, [it.true_label], [it.top_choice])
                    for li in range(model.num_layers):
                        for kind, arr in (("hidden", state.hs[li]), ("cell", state.cs[li])):
                            sf.write(
                                f"{session.learner_id},{t + 1},{li},{kind},"
                                + ",".join(f"{v:.10e}" for v in arr[0])
                                + "\n"
                            )
        finally:
            if cf:
                cf.close()
    paths = {"states": states_path}
    if emit_classifiers:
        paths["classifiers"] = cls_path
    return paths

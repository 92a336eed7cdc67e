"""Import shim for externally released session logs.

Field names in external releases drift; this adapter is the single place the
drift is absorbed. Any record key it does not recognize is an error, never a
silent drop.
"""

from __future__ import annotations

import json

from ..errors import IngestionError
from .sessions import Interaction, LearnerSession, validate_session

# accepted spellings -> canonical names
_SESSION_KEYS = {
    "learner_id": "learner_id",
    "learner": "learner_id",
    "worker_id": "learner_id",
    "participant_id": "learner_id",
    "dataset": "dataset",
    "dataset_name": "dataset",
    "task": "dataset",
    "client_seed": "client_seed",
    "seed": "client_seed",
    "started_at": "started_at",
    "start_time": "started_at",
    "finished_at": "finished_at",
    "end_time": "finished_at",
    "interactions": "interactions",
    "trials": "interactions",
    "responses": "interactions",
    "metadata": "metadata",
}

_INTERACTION_KEYS = {
    "step": "step",
    "trial": "step",
    "t": "step",
    "item_id": "item_id",
    "item": "item_id",
    "image": "item_id",
    "image_id": "item_id",
    "stimulus": "item_id",
    "true_label": "true_label",
    "label": "true_label",
    "y": "true_label",
    "gt": "true_label",
    "response": "response",
    "ranked_response": "response",
    "ranks": "response",
    "r": "response",
    "phase": "phase",
    "split": "phase",
    "mode": "phase",
    "latency_ms": "latency_ms",
    "rt_ms": "latency_ms",
    "time_ms": "latency_ms",
}

_PHASES = {"train": "train", "training": "train", "teach": "train", "test": "test", "testing": "test"}


def _remap(raw: dict, table: dict, where: str) -> dict:
    out = {}
    for key, value in raw.items():
        canon = table.get(key)
        if canon is None:
            raise IngestionError(
                f"import adapter: unmapped field {key!r} in {where}; "
                "extend the adapter mapping before importing this release"
            )
        if canon in out:
            raise IngestionError(f"import adapter: {where} maps two fields onto {canon!r}")
        out[canon] = value
    return out


def adapt_session(raw: dict, label_base: int = 1) -> LearnerSession:
    """Convert one external record into the canonical session schema.

    ``label_base`` declares the class indexing of the source (0 or 1);
    0-based sources are shifted up to the canonical 1-based indices.
    """
    top = _remap(raw, _SESSION_KEYS, "session record")
    for required in ("learner_id", "dataset", "interactions"):
        if required not in top:
            raise IngestionError(f"import adapter: session record lacks {required!r}")
    shift = 1 - label_base
    interactions = []
    for pos, entry in enumerate(top["interactions"], start=1):
        it = _remap(entry, _INTERACTION_KEYS, f"interaction {pos}")
        for required in ("item_id", "true_label", "response", "phase"):
            if required not in it:
                raise IngestionError(f"import adapter: interaction {pos} lacks {required!r}")
        phase = _PHASES.get(str(it["phase"]).lower())
        if phase is None:
            raise IngestionError(f"import adapter: interaction {pos} has unknown phase {it['phase']!r}")
        response = [int(r) + shift for r in it["response"]]
        if len(response) != 3:
            raise IngestionError(f"import adapter: interaction {pos} response is not a top-3 ranking")
        interactions.append(
            Interaction(
                step=int(it.get("step", pos)),
                item_id=str(it["item_id"]),
                true_label=int(it["true_label"]) + shift,
                response=tuple(response),
                phase=phase,
                latency_ms=it.get("latency_ms"),
            )
        )
    session = LearnerSession(
        learner_id=str(top["learner_id"]),
        dataset=str(top["dataset"]),
        client_seed=top.get("client_seed"),
        started_at=top.get("started_at"),
        finished_at=top.get("finished_at"),
        metadata=top.get("metadata", {}),
        interactions=interactions,
    )
    violations = validate_session(session)
    if violations:
        raise IngestionError(
            f"import adapter: session {session.learner_id!r} invalid after mapping: "
            + "; ".join(violations[:5])
        )
    return session


def adapt_jsonl(path, label_base: int = 1) -> list:
    sessions = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"{path}:{lineno}: not JSON: {exc}") from exc
            sessions.append(adapt_session(raw, label_base=label_base))
    return sessions

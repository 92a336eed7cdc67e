"""Learner sessions: 30 feedback (train) steps followed by 15 no-feedback
(test) steps, each a ranked top-3 classification of one stimulus."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import IngestionError
from .manifest import DatasetManifest

TRAIN_STEPS = 30
TEST_STEPS = 15
SESSION_STEPS = TRAIN_STEPS + TEST_STEPS


@dataclass
class Interaction:
    step: int
    item_id: str
    true_label: int
    response: tuple  # ranked top-3 classes, most to least likely
    phase: str  # "train" | "test"
    latency_ms: Optional[float] = None

    @property
    def top_choice(self) -> int:
        return self.response[0]

    @property
    def correct(self) -> bool:
        return self.response[0] == self.true_label


@dataclass
class LearnerSession:
    learner_id: str
    dataset: str
    interactions: list
    client_seed: Optional[int] = None
    started_at: Optional[str] = None
    finished_at: Optional[str] = None
    metadata: dict = field(default_factory=dict)

    @property
    def train_interactions(self) -> list:
        return [it for it in self.interactions if it.phase == "train"]

    @property
    def test_interactions(self) -> list:
        return [it for it in self.interactions if it.phase == "test"]

    def correct_count(self, phase: str) -> int:
        return sum(1 for it in self.interactions if it.phase == phase and it.correct)


def validate_session(session: LearnerSession, manifest: Optional[DatasetManifest] = None) -> list:
    """Check every session invariant; returns a list of violations (never raises)."""
    v = []
    its = session.interactions
    if len(its) != SESSION_STEPS:
        v.append(f"expected {SESSION_STEPS} interactions, got {len(its)}")
    num_classes = manifest.num_classes if manifest else None
    seen_by_phase = {"train": set(), "test": set()}
    for pos, it in enumerate(its, start=1):
        if it.step != pos:
            v.append(f"step {pos}: out-of-order step index {it.step}")
        expected_phase = "train" if pos <= TRAIN_STEPS else "test"
        if pos <= SESSION_STEPS and it.phase != expected_phase:
            v.append(f"step {pos}: phase {it.phase!r}, expected {expected_phase!r}")
        if it.phase not in ("train", "test"):
            v.append(f"step {pos}: unknown phase {it.phase!r}")
        if len(it.response) != 3 or len(set(it.response)) != 3:
            v.append(f"step {pos}: ranks not distinct: {tuple(it.response)}")
        if num_classes is not None:
            for r in it.response:
                if not 1 <= r <= num_classes:
                    v.append(f"step {pos}: rank {r} outside [1, {num_classes}]")
            if not 1 <= it.true_label <= num_classes:
                v.append(f"step {pos}: label {it.true_label} outside [1, {num_classes}]")
        elif it.true_label < 1 or any(r < 1 for r in it.response):
            v.append(f"step {pos}: class indices must be >= 1")
        if it.phase in seen_by_phase:
            if it.item_id in seen_by_phase[it.phase]:
                v.append(f"step {pos}: stimulus {it.item_id!r} repeated within {it.phase} phase")
            seen_by_phase[it.phase].add(it.item_id)
        if manifest is not None and it.item_id not in manifest:
            v.append(f"step {pos}: stimulus {it.item_id!r} not in dataset {manifest.name!r}")
    return v


def session_to_dict(session: LearnerSession) -> dict:
    out = {
        "learner_id": session.learner_id,
        "dataset": session.dataset,
        "client_seed": session.client_seed,
        "started_at": session.started_at,
        "finished_at": session.finished_at,
        "interactions": [
            {
                "step": it.step,
                "item_id": it.item_id,
                "true_label": it.true_label,
                "response": list(it.response),
                "phase": it.phase,
                **({"latency_ms": it.latency_ms} if it.latency_ms is not None else {}),
            }
            for it in session.interactions
        ],
    }
    if session.metadata:
        out["metadata"] = session.metadata
    return out


def session_from_dict(raw: dict) -> LearnerSession:
    return LearnerSession(
        learner_id=str(raw["learner_id"]),
        dataset=str(raw["dataset"]),
        client_seed=raw.get("client_seed"),
        started_at=raw.get("started_at"),
        finished_at=raw.get("finished_at"),
        metadata=raw.get("metadata", {}),
        interactions=[
            Interaction(
                step=int(i["step"]),
                item_id=str(i["item_id"]),
                true_label=int(i["true_label"]),
                response=tuple(int(r) for r in i["response"]),
                phase=str(i["phase"]),
                latency_ms=i.get("latency_ms"),
            )
            for i in raw["interactions"]
        ],
    )


def load_sessions(path, manifest: Optional[DatasetManifest] = None) -> list:
    """Read a JSONL session log; every session must pass validation."""
    sessions = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                session = session_from_dict(raw)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise IngestionError(f"{path}:{lineno}: malformed session record: {exc}") from exc
            violations = validate_session(session, manifest)
            if violations:
                raise IngestionError(
                    f"{path}:{lineno}: session {session.learner_id!r} rejected: "
                    + "; ".join(violations[:5])
                )
            sessions.append(session)
    return sessions


def save_sessions(path, sessions) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for s in sessions:
            fh.write(json.dumps(session_to_dict(s)) + "\n")

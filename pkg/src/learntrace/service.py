"""Session-collection service.

Serves the feedback-then-test annotation loop over JSON/HTTP: a session walks
45 steps (30 with true-label feedback, 15 without), collecting a ranked top-3
response per stimulus. Server-side validation is authoritative; completed
sessions are appended to a JSONL log exactly once, abandoned sessions go to a
separate file and never enter training sets.
"""

import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .data.manifest import DatasetManifest
from .data.sessions import (
    SESSION_STEPS,
    TRAIN_STEPS,
    Interaction,
    LearnerSession,
    session_to_dict,
    validate_session,
)
from .errors import ConfigError

DEFAULT_TIMEOUT_S = 60 * 60


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class SessionRecord:
    session_id: str
    learner: str
    dataset: str
    seed: int
    stimulus_order: list
    status: str = "active"  # active | complete | abandoned
    cursor: int = 1  # next step index to answer
    interactions: list = field(default_factory=list)
    started_at: str = field(default_factory=_now_iso)
    finished_at: Optional[str] = None
    last_activity: float = field(default_factory=time.time)
    served_at: Optional[float] = None
    persisted: bool = False

    def to_session(self) -> LearnerSession:
        return LearnerSession(
            learner_id=self.session_id,
            dataset=self.dataset,
            interactions=list(self.interactions),
            client_seed=self.seed,
            started_at=self.started_at,
            finished_at=self.finished_at,
            metadata={"learner": self.learner, "status": self.status},
        )


class SessionService:
    """In-memory session store with per-session serialization and JSONL
    persistence. ``clock`` is injectable for timeout tests."""

    def __init__(
        self,
        datasets: dict,
        out_path,
        abandoned_path=None,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        clock=time.time,
    ):
        if not datasets:
            raise ConfigError("the session service needs at least one dataset")
        self.datasets = datasets
        self.out_path = Path(out_path)
        self.abandoned_path = (
            Path(abandoned_path)
            if abandoned_path
            else self.out_path.with_name(self.out_path.stem + ".abandoned.jsonl")
        )
        self.timeout_s = timeout_s
        self.clock = clock
        self._records: dict = {}
        self._locks: dict = {}
        self._registry_lock = threading.Lock()
        self._write_lock = threading.Lock()

    # ------------------------------------------------------------- helpers
    def _get(self, session_id: str) -> tuple:
        with self._registry_lock:
            record = self._records.get(session_id)
            if record is None:
                raise ServiceError(404, "unknown_session", f"no session {session_id!r}")
            return record, self._locks[session_id]

    def _expire_if_idle(self, record: SessionRecord) -> None:
        if record.status == "active" and self.clock() - record.last_activity > self.timeout_s:
            record.status = "abandoned"
            record.finished_at = _now_iso()
            self._persist(record)

    def _stimulus_payload(self, record: SessionRecord) -> dict:
        manifest = self.datasets[record.dataset]
        item = manifest.item(record.stimulus_order[record.cursor - 1])
        phase = "train" if record.cursor <= TRAIN_STEPS else "test"
        return {
            "step": record.cursor,
            "total_steps": SESSION_STEPS,
            "phase": phase,
            "item_id": item.item_id,
            "image_url": f"/images/{record.dataset}/{item.path}" if item.path else None,
            "class_names": list(manifest.classes),
        }

    def _persist(self, record: SessionRecord) -> Path:
        target = self.out_path if record.status == "complete" else self.abandoned_path
        if record.persisted:
            return target
        session = record.to_session()
        if record.status == "complete":
            manifest = self.datasets[record.dataset]
            problems = validate_session(session, manifest)
            if problems:
                raise ServiceError(
                    500, "invalid_session", f"refusing to persist: {problems[:3]}"
                )
        line = json.dumps(session_to_dict(session)) + "\n"
        with self._write_lock:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, "a", encoding="utf-8") as fh:
                fh.write(line)
        record.persisted = True
        return target

    # ------------------------------------------------------------- operations
    def start_session(self, dataset: str, learner: str = "") -> dict:
        manifest = self.datasets.get(dataset)
        if manifest is None:
            raise ServiceError(404, "unknown_dataset", f"no dataset {dataset!r}")
        if len(manifest.items) < SESSION_STEPS:
            raise ServiceError(
                409, "dataset_too_small", f"dataset {dataset!r} has fewer than {SESSION_STEPS} items"
            )
        seed = secrets.randbelow(2**31 - 1)
        rng = np.random.default_rng(seed)
        # 30 + 15 without replacement within each phase (and across the session)
        picks = rng.choice(len(manifest.items), size=SESSION_STEPS, replace=False)
        order = [manifest.items[i].item_id for i in picks]
        session_id = secrets.token_hex(8)
        record = SessionRecord(
            session_id=session_id,
            learner=learner,
            dataset=dataset,
            seed=seed,
            stimulus_order=order,
            last_activity=self.clock(),
        )
        with self._registry_lock:
            self._records[session_id] = record
            self._locks[session_id] = threading.Lock()
        record.served_at = self.clock()
        return {"session_id": session_id, "stimulus": self._stimulus_payload(record)}

    def get_stimulus(self, session_id: str) -> dict:
        record, lock = self._get(session_id)
        with lock:
            self._expire_if_idle(record)
            if record.status == "abandoned":
                raise ServiceError(410, "session_abandoned", "session timed out")
            if record.status == "complete":
                return {"completed": True, "summary": self._summary(record)}
            if record.served_at is None:
                record.served_at = self.clock()
            return self._stimulus_payload(record)

    def _summary(self, record: SessionRecord) -> dict:
        return {
            "test_correct": sum(
                1 for it in record.interactions if it.phase == "test" and it.correct
            ),
            "train_correct": sum(
                1 for it in record.interactions if it.phase == "train" and it.correct
            ),
        }

    def submit_response(self, session_id: str, step: int, ranks) -> dict:
        record, lock = self._get(session_id)
        with lock:
            self._expire_if_idle(record)
            if record.status == "abandoned":
                raise ServiceError(410, "session_abandoned", "session timed out")
            if record.status == "complete":
                raise ServiceError(409, "session_complete", "session already finished")
            if step != record.cursor:
                raise ServiceError(
                    409, "step_conflict", f"expected step {record.cursor}, got {step}"
                )
            manifest = self.datasets[record.dataset]
            c = manifest.num_classes
            ranks = list(ranks)
            if (
                len(ranks) != 3
                or len(set(ranks)) != 3
                or any(not isinstance(r, int) or not 1 <= r <= c for r in ranks)
            ):
                raise ServiceError(
                    422, "invalid_ranks", f"ranks must be 3 distinct classes in [1, {c}]"
                )
            now = self.clock()
            latency_ms = None if record.served_at is None else (now - record.served_at) * 1000.0
            item = manifest.item(record.stimulus_order[record.cursor - 1])
            phase = "train" if record.cursor <= TRAIN_STEPS else "test"
            record.interactions.append(
                Interaction(
                    step=record.cursor,
                    item_id=item.item_id,
                    true_label=item.label,
                    response=tuple(ranks),
                    phase=phase,
                    latency_ms=latency_ms,
                )
            )
            record.last_activity = now
            out = {"step": step, "phase": phase}
            if phase == "train":
                out["feedback"] = {
                    "true_label": item.label,
                    "class_name": manifest.classes[item.label - 1],
                    "correct": ranks[0] == item.label,
                }
            record.cursor += 1
            if record.cursor > SESSION_STEPS:
                record.status = "complete"
                record.finished_at = _now_iso()
                out["completed"] = True
                out["summary"] = self._summary(record)
            else:
                record.served_at = self.clock()
                out["next_stimulus"] = self._stimulus_payload(record)
            return out

    def finalize_session(self, session_id: str, abandoned: bool = False) -> dict:
        record, lock = self._get(session_id)
        with lock:
            self._expire_if_idle(record)
            if record.status == "active":
                if not abandoned:
                    raise ServiceError(
                        409, "session_incomplete", "session is not complete; pass abandoned=true to discard"
                    )
                record.status = "abandoned"
                record.finished_at = _now_iso()
            path = self._persist(record)
            return {"status": record.status, "persisted": True, "path": str(path)}

    def admin_sessions(self) -> list:
        with self._registry_lock:
            records = list(self._records.values())
        out = []
        for r in records:
            self._expire_if_idle(r)
            entry = {
                "session_id": r.session_id,
                "learner": r.learner,
                "dataset": r.dataset,
                "status": r.status,
                "cursor": r.cursor,
                "started_at": r.started_at,
                "finished_at": r.finished_at,
            }
            if r.status == "complete":
                entry.update(self._summary(r))
            out.append(entry)
        return out


def build_app(service: SessionService) -> FastAPI:
    app = FastAPI(title="learner session service")
    app.state.service = service

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.message, "code": exc.code}
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "datasets": sorted(service.datasets)}

    @app.post("/sessions")
    async def start(request: Request):
        body = await request.json()
        return service.start_session(
            dataset=body.get("dataset", ""), learner=str(body.get("learner", ""))
        )

    @app.get("/sessions/{session_id}/stimulus")
    def stimulus(session_id: str):
        return service.get_stimulus(session_id)

    @app.post("/sessions/{session_id}/responses")
    async def respond(request: Request, session_id: str):
        body = await request.json()
        if "step" not in body or "ranks" not in body:
            raise ServiceError(422, "missing_fields", "payload needs 'step' and 'ranks'")
        return service.submit_response(session_id, int(body["step"]), body["ranks"])

    @app.post("/sessions/{session_id}/finalize")
    async def finalize(request: Request, session_id: str):
        raw = await request.body()
        body = json.loads(raw) if raw else {}
        return service.finalize_session(session_id, abandoned=bool(body.get("abandoned", False)))

    @app.get("/admin/sessions")
    def admin():
        return {"sessions": service.admin_sessions()}

    for name, manifest in service.datasets.items():
        if manifest.root is not None and any(it.path for it in manifest.items):
            app.mount(f"/images/{name}", StaticFiles(directory=manifest.root), name=f"img-{name}")
    return app


def service_from_env(env) -> SessionService:
    """Build a service from LEARNTRACE_DATASETS (comma-separated manifest
    paths) and LEARNTRACE_OUT; used by the `serve` CLI subcommand."""
    from .data.manifest import load_manifest

    paths = [p for p in env.get("LEARNTRACE_DATASETS", "").split(",") if p.strip()]
    if not paths:
        raise ConfigError("set LEARNTRACE_DATASETS to one or more manifest paths")
    datasets = {}
    for p in paths:
        manifest = load_manifest(p.strip())
        datasets[manifest.name] = manifest
    out = env.get("LEARNTRACE_OUT", "sessions.jsonl")
    return SessionService(datasets, out)

"""Judgment collection service: HTTP API plus append-only persistence.

Jurors see pooled items one at a time in the pool's presentation order
and submit a binary and a graded judgment for each; questionnaire
responses are collected per (participant, task, phase). Every write is
appended and fsynced to a line-delimited log before it is acknowledged,
so an acknowledged submission survives a crash. Judgments are
at-most-once: resubmission is a conflict, never an overwrite.

The anonymity boundary lives here: no juror-reachable endpoint ever
serializes an engine id, a rank, or a click flag.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from pydantic import BaseModel

from .config import StudyConfig
from .pooling import JudgmentPool


class ConflictError(ValueError):
    pass


class ValidationError(ValueError):
    pass


class NotFoundError(KeyError):
    pass


@dataclass(frozen=True)
class Judgment:
    pool_id: str
    item_id: str
    participant_id: str
    binary: bool
    graded: int
    judged_at: int  # epoch milliseconds


@dataclass(frozen=True)
class QuestionnaireResponse:
    participant_id: str
    task_id: str
    phase: str  # "pre" | "post"
    answers: dict
    submitted_at: int


def participant_token(study_seed: int, participant_id: str) -> str:
    """Deterministic per-participant access token, issued at pool creation."""
    material = f"token\x1f{study_seed}\x1f{participant_id}".encode("utf-8")
    return hashlib.sha256(material).hexdigest()[:20]


class JudgmentStore:
    """Append-only JSONL log with snapshot-accelerated recovery.

    Each record is one line: {"type": "judgment" | "questionnaire", ...}.
    A snapshot records the log byte offset it covers; recovery loads the
    snapshot (when valid) and replays the log tail.
    """

    def __init__(self, log_path):
        self.log_path = Path(log_path)
        self.snapshot_path = self.log_path.with_suffix(self.log_path.suffix + ".snapshot")
        self._lock = threading.Lock()
        self.judgments: dict[tuple[str, str, str], Judgment] = {}
        self.responses: dict[tuple[str, str, str], QuestionnaireResponse] = {}
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        self._recover()
        self._fh = open(self.log_path, "a", encoding="utf-8")

    def _recover(self) -> None:
        offset = 0
        if self.snapshot_path.exists():
            try:
                snap = json.loads(self.snapshot_path.read_text())
                for rec in snap["judgments"]:
                    j = Judgment(**rec)
                    self.judgments[(j.pool_id, j.item_id, j.participant_id)] = j
                for rec in snap["responses"]:
                    r = QuestionnaireResponse(**rec)
                    self.responses[(r.participant_id, r.task_id, r.phase)] = r
                offset = snap["log_offset"]
            except (json.JSONDecodeError, KeyError, TypeError):
                # Corrupt snapshot: fall back to a full log replay.
                self.judgments.clear()
                self.responses.clear()
                offset = 0
        if not self.log_path.exists():
            return
        with open(self.log_path, "r", encoding="utf-8") as fh:
            fh.seek(offset)
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn tail write from a crash
                if rec.get("type") == "judgment":
                    j = Judgment(rec["pool_id"], rec["item_id"], rec["participant_id"],
                                 rec["binary"], rec["graded"], rec["judged_at"])
                    self.judgments.setdefault((j.pool_id, j.item_id, j.participant_id), j)
                elif rec.get("type") == "questionnaire":
                    r = QuestionnaireResponse(rec["participant_id"], rec["task_id"],
                                              rec["phase"], rec["answers"], rec["submitted_at"])
                    self.responses.setdefault((r.participant_id, r.task_id, r.phase), r)

    def _append(self, record: dict) -> None:
        self._fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def add_judgment(self, judgment: Judgment) -> None:
        key = (judgment.pool_id, judgment.item_id, judgment.participant_id)
        with self._lock:
            if key in self.judgments:
                raise ConflictError(
                    f"({judgment.pool_id}, {judgment.item_id}) already judged by "
                    f"{judgment.participant_id}"
                )
            self._append({"type": "judgment", **judgment.__dict__})
            self.judgments[key] = judgment

    def add_questionnaire(self, response: QuestionnaireResponse) -> None:
        key = (response.participant_id, response.task_id, response.phase)
        with self._lock:
            if key in self.responses:
                raise ConflictError(
                    f"{response.phase} questionnaire already submitted for "
                    f"({response.participant_id}, {response.task_id})"
                )
            self._append({"type": "questionnaire", **response.__dict__})
            self.responses[key] = response

    def write_snapshot(self) -> None:
        with self._lock:
            self._fh.flush()
            os.fsync(self._fh.fileno())
            offset = self.log_path.stat().st_size
            tmp = self.snapshot_path.with_suffix(".tmp")
            tmp.write_text(json.dumps({
                "log_offset": offset,
                "judgments": [j.__dict__ for j in self.judgments.values()],
                "responses": [r.__dict__ for r in self.responses.values()],
            }))
            tmp.replace(self.snapshot_path)

    def close(self) -> None:
        self._fh.close()


# ---------------------------------------------------------------------------
# Domain operations (HTTP-independent)


def next_item(pool: JudgmentPool, participant_id: str, store: JudgmentStore) -> dict:
    """First item in presentation order lacking a judgment by this
    participant; a done-marker once none remain. Juror-facing shape only."""
    judged = sum(
        1 for item in pool.items
        if (pool.pool_id, item.item_id, participant_id) in store.judgments
    )
    progress = {"judged": judged, "total": len(pool.items)}
    for item in pool.items:
        if (pool.pool_id, item.item_id, participant_id) not in store.judgments:
            return {
                "done": False,
                "item": {"item_id": item.item_id, "url": item.url,
                         "title": item.title, "snippet": item.snippet},
                "progress": progress,
            }
    return {"done": True, "item": None, "progress": progress}


def submit_judgment(judgment: Judgment, pool: JudgmentPool,
                    config: StudyConfig, store: JudgmentStore) -> None:
    scale = config.judgment_scales
    if not scale.graded_min <= judgment.graded <= scale.graded_max:
        raise ValidationError(
            f"graded {judgment.graded} outside bounds [{scale.graded_min}, {scale.graded_max}]"
        )
    if judgment.item_id not in {i.item_id for i in pool.items}:
        raise NotFoundError(f"unknown item {judgment.item_id!r} in pool {pool.pool_id!r}")
    store.add_judgment(judgment)


def submit_questionnaire(response: QuestionnaireResponse, config: StudyConfig,
                         store: JudgmentStore) -> None:
    if response.phase not in ("pre", "post"):
        raise ValidationError(f"unknown phase {response.phase!r}")
    defined = {item.item_id: item for item in config.questionnaire(response.phase)}
    for item_id, answer in response.answers.items():
        item = defined.get(item_id)
        if item is None:
            raise ValidationError(f"item {item_id!r} not in the {response.phase} questionnaire")
        if item.answer_kind == "yes_no" and not isinstance(answer, bool):
            raise ValidationError(f"item {item_id!r} expects a yes/no (boolean) answer")
        if item.answer_kind == "integer" and not isinstance(answer, int):
            raise ValidationError(f"item {item_id!r} expects an integer answer")
    store.add_questionnaire(response)


def export_judgments(pools: dict[str, JudgmentPool], store: JudgmentStore) -> dict:
    """Researcher-side export: re-joins provenance from the pool files.

    This is the sole bridge from anonymized judging back to engines.
    Returns judgment rows (one per judgment, ordered by pool and
    presentation position), a per-engine view (one judgment fanned out to
    one row per provenance entry), and questionnaire rows.
    """
    judgment_rows = []
    per_engine_rows = []
    for pool_id in sorted(pools):
        pool = pools[pool_id]
        for position, item in enumerate(pool.items, start=1):
            for (jp, ji, participant_id), j in sorted(store.judgments.items()):
                if jp != pool_id or ji != item.item_id:
                    continue
                base = {
                    "pool_id": pool_id,
                    "participant_id": participant_id,
                    "task_id": pool.task_id,
                    "item_id": item.item_id,
                    "position": position,
                    "url": item.url,
                    "normalized_url": item.normalized_url,
                    "binary": j.binary,
                    "graded": j.graded,
                    "judged_at": j.judged_at,
                    "was_clicked": item.was_clicked,
                    "was_visited_outside_serp": item.was_visited_outside_serp,
                    "visited_only": not item.provenance,
                }
                judgment_rows.append({**base, "provenance": [list(p) for p in item.provenance]})
                if item.provenance:
                    for engine_id, query_text, rank in item.provenance:
                        per_engine_rows.append(
                            {**base, "engine_id": engine_id, "query_text": query_text, "rank": rank}
                        )
                else:
                    per_engine_rows.append(
                        {**base, "engine_id": None, "query_text": None, "rank": None}
                    )
    questionnaire_rows = [
        {"participant_id": r.participant_id, "task_id": r.task_id, "phase": r.phase,
         "answers": r.answers, "submitted_at": r.submitted_at}
        for _, r in sorted(store.responses.items())
    ]
    return {
        "judgments": judgment_rows,
        "per_engine": per_engine_rows,
        "questionnaires": questionnaire_rows,
    }


# ---------------------------------------------------------------------------
# HTTP layer


class JudgmentIn(BaseModel):
    pool_id: str
    item_id: str
    participant_id: str
    token: str
    binary: bool
    graded: int
    judged_at: int = 0


class QuestionnaireIn(BaseModel):
    participant_id: str
    task_id: str
    phase: str
    token: str
    answers: dict
    submitted_at: int = 0


def create_app(config: StudyConfig, pools: dict[str, JudgmentPool],
               store: JudgmentStore, researcher_key: str = "") -> FastAPI:
    app = FastAPI(title="judgment service")
    tokens = {
        pool.participant_id: participant_token(config.shuffle_seed, pool.participant_id)
        for pool in pools.values()
    }

    def get_pool(pool_id: str) -> JudgmentPool:
        pool = pools.get(pool_id)
        if pool is None:
            raise HTTPException(status_code=404, detail=f"unknown pool {pool_id!r}")
        return pool

    def authorize(pool: JudgmentPool, participant_id: str, token: str) -> None:
        if participant_id != pool.participant_id or tokens.get(participant_id) != token:
            raise HTTPException(status_code=403, detail="participant not authorized for pool")

    @app.get("/api/v1/pools/{pool_id}/next")
    def get_next(pool_id: str, participant_id: str, token: str):
        pool = get_pool(pool_id)
        authorize(pool, participant_id, token)
        return next_item(pool, participant_id, store)

    @app.get("/api/v1/pools/{pool_id}/progress")
    def get_progress(pool_id: str, participant_id: str, token: str):
        pool = get_pool(pool_id)
        authorize(pool, participant_id, token)
        return next_item(pool, participant_id, store)["progress"]

    @app.post("/api/v1/judgments", status_code=201)
    def post_judgment(body: JudgmentIn):
        pool = get_pool(body.pool_id)
        authorize(pool, body.participant_id, body.token)
        judgment = Judgment(body.pool_id, body.item_id, body.participant_id,
                            body.binary, body.graded, body.judged_at)
        try:
            submit_judgment(judgment, pool, config, store)
        except ConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc.args[0]))
        return {"status": "accepted"}

    @app.post("/api/v1/questionnaires", status_code=201)
    def post_questionnaire(body: QuestionnaireIn):
        if tokens.get(body.participant_id) != body.token:
            raise HTTPException(status_code=403, detail="unknown participant token")
        response = QuestionnaireResponse(body.participant_id, body.task_id,
                                         body.phase, body.answers, body.submitted_at)
        try:
            submit_questionnaire(response, config, store)
        except ConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"status": "accepted"}

    @app.get("/api/v1/export")
    def get_export(request: Request):
        if not researcher_key or request.headers.get("x-researcher-key") != researcher_key:
            raise HTTPException(status_code=403, detail="researcher key required")
        return export_judgments(pools, store)

    return app

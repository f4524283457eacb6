"""HTTP session API serving the web UI.

Endpoints: POST /sessions, GET /sessions/{id}, POST /sessions/{id}/answers,
GET /sessions/{id}/result, GET /examples, GET /databases, POST /compare.
Static hosting of the built frontend is mounted at / when a UI directory
is configured. Sessions live in memory; each session is mutated by one
request at a time.
"""

from __future__ import annotations

import logging
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import preferences
from .engine import DisambiguationEngine, Session, SessionState, UserAnswer
from .errors import (
    ExecError,
    HookError,
    LexError,
    MaxIterationsExceeded,
    NoScriptMatch,
    PartialAnswers,
    SessionStateError,
    SqlClarifyError,
    StaleAnswer,
    UnknownOptionKey,
)
from .fixtures import Example
from .schema_catalog import SchemaModel
from .sql_compare import exact_match, execution_match

logger = logging.getLogger(__name__)

_STATUS = {"NotFound": 404, "Conflict": 409, "Validation": 422, "Upstream": 502, "Internal": 500}


def _fail(code: str, message: str, detail=None):
    raise HTTPException(
        status_code=_STATUS[code],
        detail={"code": code, "message": message, "detail": detail},
    )


@dataclass
class SessionRecord:
    session: Session
    gold_sql: str | None = None
    cached_result: dict | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    """In-memory session map with per-session single-writer locks."""

    def __init__(self):
        self._records: dict[str, SessionRecord] = {}
        self._lock = threading.Lock()

    def add(self, session: Session, gold_sql: str | None) -> SessionRecord:
        record = SessionRecord(session=session, gold_sql=gold_sql)
        with self._lock:
            self._records[session.id] = record
        return record

    def get(self, session_id: str) -> SessionRecord:
        with self._lock:
            record = self._records.get(session_id)
        if record is None:
            _fail("NotFound", f"no session {session_id!r}")
        return record


class CreateSessionBody(BaseModel):
    question: str = ""
    dialect: str = "sqlite"
    database_id: str = ""
    example_id: str | None = None


class AnswerBody(BaseModel):
    question_id: str
    selected_key: str


class SubmitAnswersBody(BaseModel):
    answers: list[AnswerBody] = Field(default_factory=list)
    additional_constraints: list[str] = Field(default_factory=list)


class CompareBody(BaseModel):
    pred: str
    gold: str
    database_id: str | None = None


def _question_payload(question) -> dict:
    return {
        "id": question.id,
        "ambiguity_id": question.ambiguity_id,
        "text": question.text,
        "options": [
            {
                "key": o.key,
                "display": o.display,
                "resolution": o.resolution,
                "snippet": o.snippet.to_dict() if o.snippet else None,
            }
            for o in question.options
        ],
    }


def _summary(record: SessionRecord) -> dict:
    session = record.session
    return {
        "session_id": session.id,
        "state": session.state.value,
        "iteration": session.iteration,
        "original_question": session.original_question,
        "rewritten_question": session.rewritten_question,
        "database_id": session.schema.database_id,
        "dialect": session.dialect,
        "open_questions": [_question_payload(q) for q in session.open_questions],
        "constraint_log": list(session.constraint_log),
        "preference_tree": preferences.snapshot(session.preference_tree),
        "has_gold": record.gold_sql is not None,
    }


def create_app(
    engine: DisambiguationEngine,
    schemas: dict[str, SchemaModel],
    db_paths: dict[str, Path],
    examples: list[Example],
    hook,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="sqlclarify", version="0.1.0")
    store = SessionStore()
    examples_by_id = {e.example_id: e for e in examples}

    @app.get("/examples")
    def list_examples():
        return [
            {
                "example_id": e.example_id,
                "label": e.label,
                "question": e.question,
                "dialect": e.dialect,
                "database_id": e.database_id,
            }
            for e in examples
        ]

    @app.get("/databases")
    def list_databases():
        return [
            {
                "database_id": model.database_id,
                "dialect": model.dialect,
                "tables": [t.name for t in model.tables],
                "file_backed": database_id in db_paths,
            }
            for database_id, model in sorted(schemas.items())
        ]

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        question, dialect, database_id = body.question, body.dialect, body.database_id
        gold_sql = None
        if body.example_id is not None:
            example = examples_by_id.get(body.example_id)
            if example is None:
                _fail("NotFound", f"no example {body.example_id!r}")
            question = question or example.question
            dialect = example.dialect if body.dialect == "sqlite" else dialect
            database_id = database_id or example.database_id
            gold_sql = example.gold_sql
        if not question.strip():
            _fail("Validation", "question must be non-empty")
        schema = schemas.get(database_id)
        if schema is None:
            _fail("NotFound", f"unknown database {database_id!r}")
        session = engine.new_session(uuid.uuid4().hex[:12], question, schema, dialect)
        record = store.add(session, gold_sql)
        with record.lock:
            try:
                engine.start(session)
            except SqlClarifyError as exc:
                _fail("Upstream", f"detection failed: {exc}")
            return _summary(record)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _summary(store.get(session_id))

    @app.post("/sessions/{session_id}/answers")
    def submit_answers(session_id: str, body: SubmitAnswersBody):
        record = store.get(session_id)
        answers = [UserAnswer(a.question_id, a.selected_key) for a in body.answers]
        with record.lock:
            try:
                engine.apply_answers(record.session, answers, list(body.additional_constraints))
            except SessionStateError as exc:
                _fail("Conflict", str(exc))
            except (StaleAnswer, PartialAnswers, UnknownOptionKey) as exc:
                detail = getattr(exc, "missing_ids", None)
                _fail("Validation", str(exc), detail)
            except MaxIterationsExceeded:
                pass  # session is Failed; the summary reports it
            except SqlClarifyError as exc:
                _fail("Upstream", str(exc))
            return _summary(record)

    def _generate_side(question: str, schema: SchemaModel, dialect: str) -> dict:
        try:
            return {"sql": hook.generate(question, schema, dialect), "error": None}
        except (HookError, NoScriptMatch, SqlClarifyError) as exc:
            return {"sql": None, "error": str(exc)}

    def _compare_side(sql: str | None, gold: str, database_id: str) -> dict | None:
        if sql is None:
            return None
        try:
            report = exact_match(sql, gold)
        except LexError as exc:
            return {
                "exact": False,
                "execution": None,
                "first_divergence": None,
                "notes": f"does not tokenize: {exc}",
            }
        result = report.to_dict()
        db_path = db_paths.get(database_id)
        if db_path is not None:
            try:
                result["execution"] = execution_match(sql, gold, db_path)
            except ExecError as exc:
                result["notes"] = (result["notes"] + f" execution failed: {exc}").strip()
        return result

    @app.get("/sessions/{session_id}/result")
    def get_result(session_id: str):
        record = store.get(session_id)
        with record.lock:
            session = record.session
            if session.state is not SessionState.RESOLVED:
                _fail("Conflict", f"session is {session.state.value}, not resolved")
            if record.cached_result is not None:
                return record.cached_result
            schema, dialect = session.schema, session.dialect
            without = _generate_side(session.original_question, schema, dialect)
            with_side = _generate_side(session.rewritten_question, schema, dialect)
            comparison = None
            if record.gold_sql is not None:
                comparison = {
                    "gold_sql": record.gold_sql,
                    "without": _compare_side(without["sql"], record.gold_sql, schema.database_id),
                    "with": _compare_side(with_side["sql"], record.gold_sql, schema.database_id),
                }
            record.cached_result = {
                "session_id": session.id,
                "rewritten_question": session.rewritten_question,
                "preference_snapshot": preferences.snapshot(session.preference_tree),
                "generated_sql_without": without,
                "generated_sql_with": with_side,
                "comparison": comparison,
            }
            if without["error"] or with_side["error"]:
                logger.warning(
                    "partial result for session %s: without=%s with=%s",
                    session.id,
                    without["error"],
                    with_side["error"],
                )
            return record.cached_result

    @app.post("/compare")
    def compare(body: CompareBody):
        try:
            report = exact_match(body.pred, body.gold)
        except LexError as exc:
            _fail("Validation", f"SQL does not tokenize: {exc}")
        result = report.to_dict()
        db_path = db_paths.get(body.database_id or "")
        if db_path is not None:
            try:
                result["execution"] = execution_match(body.pred, body.gold, db_path)
            except ExecError as exc:
                result["notes"] = (result["notes"] + f" execution failed: {exc}").strip()
        return result

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app

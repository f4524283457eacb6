"""Two-stage clarification pipeline.

Stage 1 detects ambiguous phrases and turns each into a multiple-choice
clarification question. Stage 2 records the user's answers in the
preference tree, rewrites the question (folding in answers and any
additional free-text constraints), and re-runs detection on the rewrite
until nothing ambiguous remains or the iteration cap is hit.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from . import preferences
from .errors import (
    ClarificationFailure,
    DetectionFailure,
    MaxIterationsExceeded,
    ParseFailure,
    PartialAnswers,
    RefinementFailure,
    SessionStateError,
    SqlClarifyError,
    StaleAnswer,
    UnknownCategory,
    UnknownColumn,
    UnknownOptionKey,
)
from .llm_gateway import (
    Gateway,
    build_clarification_prompt,
    build_detection_prompt,
    build_refinement_prompt,
)
from .preferences import PreferenceTree, derive_target_key
from .schema_catalog import SchemaModel, SchemaSnippet, column_snippet, render_for_prompt
from .taxonomy import AmbiguityCategory, Dimension, dimension_of, parse_category

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERATIONS = 3
MAX_EVIDENCE_COLUMNS = 3  # matches the demo's three-choice dropdown
MAX_OPTIONS = 6


@dataclass(frozen=True)
class DetectedAmbiguity:
    id: str
    phrase: str
    span: tuple[int, int]
    category: AmbiguityCategory
    rationale: str
    evidence: tuple[SchemaSnippet, ...] = ()


@dataclass(frozen=True)
class ClarificationOption:
    key: str
    display: str
    resolution: str
    snippet: SchemaSnippet | None = None


@dataclass(frozen=True)
class ClarificationQuestion:
    id: str
    ambiguity_id: str
    text: str
    options: tuple[ClarificationOption, ...]

    def option(self, key: str) -> ClarificationOption | None:
        for opt in self.options:
            if opt.key == key:
                return opt
        return None


@dataclass(frozen=True)
class UserAnswer:
    question_id: str
    selected_key: str


class SessionState(str, Enum):
    DETECTING = "detecting"
    AWAITING_ANSWERS = "awaiting_answers"
    RESOLVED = "resolved"
    FAILED = "failed"


@dataclass
class Session:
    id: str
    original_question: str
    schema: SchemaModel
    dialect: str
    rewritten_question: str
    state: SessionState = SessionState.DETECTING
    iteration: int = 0
    open_questions: list[ClarificationQuestion] = field(default_factory=list)
    ambiguities: dict[str, DetectedAmbiguity] = field(default_factory=dict)
    preference_tree: PreferenceTree = field(default_factory=PreferenceTree.empty)
    constraint_log: list[str] = field(default_factory=list)
    event_log: list[tuple[str, str]] = field(default_factory=list)

    def log(self, event: str) -> None:
        self.event_log.append(
            (datetime.now(timezone.utc).isoformat(timespec="seconds"), event)
        )


class DisambiguationEngine:
    """Stateless pipeline logic; sessions carry all mutable state."""

    def __init__(
        self,
        gateway: Gateway,
        max_iterations: int = DEFAULT_MAX_ITERATIONS,
        schema_budget: int = 4000,
        snippet_k: int = 3,
    ):
        if max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        self.gateway = gateway
        self.max_iterations = max_iterations
        self.schema_budget = schema_budget
        self.snippet_k = snippet_k

    # -- session lifecycle --------------------------------------------------

    def new_session(
        self,
        session_id: str,
        question: str,
        schema: SchemaModel,
        dialect: str | None = None,
    ) -> Session:
        if not question.strip():
            raise ValueError("question must be non-empty")
        session = Session(
            id=session_id,
            original_question=question,
            schema=schema,
            dialect=dialect or schema.dialect,
            rewritten_question=question,
        )
        session.log("session created")
        return session

    def start(self, session: Session) -> Session:
        """Initial detection pass; moves to AwaitingAnswers or Resolved.

        Raises:
            DetectionFailure / ClarificationFailure: gateway failure; the
                session is left in the Failed state.
        """
        if session.state is not SessionState.DETECTING:
            raise SessionStateError(f"cannot start a session in state {session.state.value}")
        try:
            found = self.detect(
                session.original_question, session.schema, id_prefix=f"a{session.iteration}"
            )
        except DetectionFailure:
            session.state = SessionState.FAILED
            session.log("detection failed")
            raise
        self._install_detections(session, found)
        return session

    def _install_detections(self, session: Session, found: list[DetectedAmbiguity]) -> None:
        session.log(f"detection pass found {len(found)} ambiguity(ies)")
        if not found:
            session.state = SessionState.RESOLVED
            session.open_questions = []
            session.log("resolved: no ambiguities remain")
            return
        for amb in found:
            session.ambiguities[amb.id] = amb
        questions = self.clarify(
            found, session.schema, session.rewritten_question, id_prefix=f"q{session.iteration}"
        )
        if not questions:
            # every clarification failed; nothing answerable remains
            session.state = SessionState.FAILED
            session.log("failed: no clarification question could be generated")
            return
        session.open_questions = list(questions)
        session.state = SessionState.AWAITING_ANSWERS
        session.log(f"issued {len(questions)} clarification question(s)")

    # -- stage 1 -------------------------------------------------------------

    def detect(
        self,
        question: str,
        schema: SchemaModel,
        preferences_text: str = "",
        id_prefix: str = "amb",
    ) -> list[DetectedAmbiguity]:
        """Detect ambiguous phrases in ``question``.

        Raw model items are validated: the category label must parse, the
        phrase must occur (case-insensitively) in the question; items
        failing validation are dropped and logged. DB-related items get
        evidence snippets for up to three candidate columns named in the
        rationale.

        Raises:
            DetectionFailure: if the gateway fails even after the repair retry.
        """
        if not question.strip():
            raise ValueError("question must be non-empty")
        request = build_detection_prompt(
            question, render_for_prompt(schema, self.schema_budget), preferences_text
        )
        try:
            items = self.gateway.complete_structured(request, "detection")
        except (SqlClarifyError, ParseFailure) as exc:
            raise DetectionFailure(f"detection gateway call failed: {exc}") from exc

        found: list[DetectedAmbiguity] = []
        lowered = question.lower()
        for item in items:
            try:
                category = parse_category(item["category_label"])
            except UnknownCategory:
                logger.info("dropping detection with unknown category %r", item["category_label"])
                continue
            phrase = item["phrase"]
            start = lowered.find(phrase.lower())
            if not phrase or start < 0:
                logger.info("dropping detection whose phrase %r is not in the question", phrase)
                continue
            span = (start, start + len(phrase))
            evidence: tuple[SchemaSnippet, ...] = ()
            if dimension_of(category) is Dimension.DB_RELATED:
                evidence = tuple(
                    column_snippet(schema, t, c, self.snippet_k)
                    for t, c in self._candidate_columns(item["rationale"], schema)
                )
            found.append(
                DetectedAmbiguity(
                    id=f"{id_prefix}-{len(found)}",
                    phrase=question[span[0] : span[1]],
                    span=span,
                    category=category,
                    rationale=item["rationale"],
                    evidence=evidence,
                )
            )
        return found

    @staticmethod
    def _candidate_columns(rationale: str, schema: SchemaModel) -> list[tuple[str, str]]:
        candidates: list[tuple[str, str]] = []
        for table in schema.tables:
            for col in table.columns:
                pattern = rf"(?<![A-Za-z0-9_]){re.escape(col.name)}(?![A-Za-z0-9_])"
                if re.search(pattern, rationale, re.IGNORECASE):
                    candidates.append((table.name, col.name))
                if len(candidates) >= MAX_EVIDENCE_COLUMNS:
                    return candidates
        return candidates

    def clarify(
        self,
        ambiguities: list[DetectedAmbiguity],
        schema: SchemaModel,
        question: str,
        id_prefix: str = "q",
    ) -> list[ClarificationQuestion]:
        """One multiple-choice question per ambiguity, order preserved.

        Items whose generated question fails validation (option count, key
        uniqueness, snippet existence) are skipped and logged rather than
        aborting the batch.
        """
        if not ambiguities:
            raise ValueError("ambiguities must be non-empty")
        questions: list[ClarificationQuestion] = []
        for idx, amb in enumerate(ambiguities):
            request = build_clarification_prompt(amb, list(amb.evidence), question)
            try:
                raw = self.gateway.complete_structured(request, "clarification")
                questions.append(
                    self._validate_question(raw, amb, schema, f"{id_prefix}-{idx}")
                )
            except (SqlClarifyError, ParseFailure) as exc:
                logger.warning("skipping clarification for %r: %s", amb.phrase, exc)
        return questions

    def _validate_question(
        self,
        raw: dict,
        ambiguity: DetectedAmbiguity,
        schema: SchemaModel,
        question_id: str,
    ) -> ClarificationQuestion:
        raw_options = raw["options"]
        if not 2 <= len(raw_options) <= MAX_OPTIONS:
            raise ClarificationFailure(f"need 2..{MAX_OPTIONS} options, got {len(raw_options)}")
        db_related = dimension_of(ambiguity.category) is Dimension.DB_RELATED
        options: list[ClarificationOption] = []
        seen_keys: set[str] = set()
        for raw_opt in raw_options:
            key = raw_opt["key"].strip().upper()
            if len(key) != 1 or not key.isalpha() or key in seen_keys:
                raise ClarificationFailure(f"bad or duplicate option key {raw_opt['key']!r}")
            seen_keys.add(key)
            if not raw_opt["resolution"].strip():
                raise ClarificationFailure(f"option {key} has an empty resolution")
            snippet = None
            table, column = raw_opt.get("table"), raw_opt.get("column")
            if table and column:
                if db_related:
                    try:
                        snippet = column_snippet(schema, table, column, self.snippet_k)
                    except UnknownColumn as exc:
                        raise ClarificationFailure(str(exc)) from exc
                else:
                    logger.info(
                        "ignoring column reference on option %s of an LLM-related question", key
                    )
            options.append(
                ClarificationOption(
                    key=key,
                    display=raw_opt["display"],
                    resolution=raw_opt["resolution"].strip(),
                    snippet=snippet,
                )
            )
        return ClarificationQuestion(
            id=question_id,
            ambiguity_id=ambiguity.id,
            text=raw["question"],
            options=tuple(options),
        )

    # -- stage 2 -------------------------------------------------------------

    def apply_answers(
        self,
        session: Session,
        answers: list[UserAnswer],
        constraints: list[str],
    ) -> Session:
        """Record answers, rewrite the question, and re-run detection.

        Every open question must be answered exactly once. Constraints are
        appended to the session's constraint log and routed to the rewrite
        only (never into the preference tree).

        Raises:
            SessionStateError: if the session is not awaiting answers.
            StaleAnswer / PartialAnswers / UnknownOptionKey: bad answer sets.
            RefinementFailure: the rewrite call failed; session -> Failed.
            MaxIterationsExceeded: iteration cap hit; session -> Failed,
                partial results retained.
        """
        if session.state is not SessionState.AWAITING_ANSWERS:
            raise SessionStateError(f"cannot apply answers in state {session.state.value}")
        open_by_id = {q.id: q for q in session.open_questions}
        answered: list[tuple[ClarificationQuestion, UserAnswer]] = []
        seen: set[str] = set()
        for answer in answers:
            question = open_by_id.get(answer.question_id)
            if question is None or answer.question_id in seen:
                raise StaleAnswer(f"question {answer.question_id!r} is not open")
            if question.option(answer.selected_key) is None:
                raise UnknownOptionKey(
                    f"question {question.id} has no option {answer.selected_key!r}"
                )
            seen.add(answer.question_id)
            answered.append((question, answer))
        # answering nothing is a legal identity/constraints-only step;
        # answering some but not all open questions is not
        missing = [qid for qid in open_by_id if qid not in seen]
        if answered and missing:
            raise PartialAnswers(missing)

        for question, answer in answered:
            option = question.option(answer.selected_key)
            ambiguity = session.ambiguities[question.ambiguity_id]
            entry = preferences.PreferenceEntry(
                target_key=derive_target_key(ambiguity.category, ambiguity.phrase, option.snippet),
                resolution=option.resolution,
                source_question_id=question.id,
            )
            preferences.record(session.preference_tree, ambiguity.category, entry, self.gateway)
            session.log(
                f"preference recorded [{ambiguity.category.value}] "
                f"{entry.target_key} -> {option.resolution}"
            )

        request = build_refinement_prompt(session.rewritten_question, answered, list(constraints))
        try:
            rewritten = self.gateway.complete_structured(request, "line")
        except (SqlClarifyError, ParseFailure) as exc:
            session.state = SessionState.FAILED
            session.log(f"refinement failed: {exc}")
            raise RefinementFailure(f"rewrite call failed: {exc}") from exc
        session.rewritten_question = rewritten
        session.constraint_log.extend(constraints)
        for constraint in constraints:
            session.log(f"constraint added: {constraint}")
        session.log(f"question rewritten: {rewritten}")

        session.iteration += 1
        session.open_questions = []
        try:
            found = self.detect(
                session.rewritten_question,
                session.schema,
                preferences_text=preferences.render_for_prompt(session.preference_tree),
                id_prefix=f"a{session.iteration}",
            )
        except DetectionFailure:
            session.state = SessionState.FAILED
            session.log("re-detection failed")
            raise
        self._install_detections(session, found)
        if session.state is SessionState.AWAITING_ANSWERS and session.iteration >= self.max_iterations:
            session.state = SessionState.FAILED
            session.log(f"failed: still ambiguous after {session.iteration} iterations")
            raise MaxIterationsExceeded(f"no resolution after {session.iteration} iterations")
        return session

    # -- driver ---------------------------------------------------------------

    def resolve_loop(self, session, answer_provider, max_iterations: int | None = None) -> Session:
        """Run detect -> clarify -> answer -> rewrite until terminal.

        ``answer_provider`` maps a list of open ClarificationQuestions to
        ``(answers, constraints)``. Terminal states are Resolved and
        Failed; at most ``max_iterations`` rewrite rounds run.
        """
        cap = self.max_iterations if max_iterations is None else max_iterations
        try:
            if session.state is SessionState.DETECTING:
                self.start(session)
            while session.state is SessionState.AWAITING_ANSWERS and session.iteration < cap:
                answers, constraints = answer_provider(list(session.open_questions))
                self.apply_answers(session, answers, constraints)
        except MaxIterationsExceeded:
            pass
        except (DetectionFailure, ClarificationFailure, RefinementFailure) as exc:
            session.state = SessionState.FAILED
            session.log(f"loop aborted: {exc}")
        if session.state is SessionState.AWAITING_ANSWERS:
            # a caller-supplied cap below the engine's stopped the loop early
            session.state = SessionState.FAILED
            session.log(f"failed: still ambiguous after {session.iteration} iteration(s)")
        return session

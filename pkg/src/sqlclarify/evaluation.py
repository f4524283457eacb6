"""Batch evaluation: dataset loading, detection scoring, end-to-end accuracy.

Detection is scored phrase-level: a detected item matches an annotation
iff their categories are equal and their character spans overlap. Per
category the matching is optimal (maximum number of matched pairs, edges
tried in descending overlap order), so the reported counts never depend
on edge order. Rollups are micro-averaged from pooled counts.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .engine import ClarificationQuestion, DetectedAmbiguity, DisambiguationEngine, SessionState, UserAnswer
from .errors import (
    HookError,
    LexError,
    NoConfidentAnswer,
    NoScriptMatch,
    SqlClarifyError,
    UnknownCategory,
    ValidationError,
)
from .llm_gateway import Gateway, build_generation_prompt, load_script
from .schema_catalog import SchemaModel, render_for_prompt, to_descriptor
from .sql_compare import canonicalize, exact_match
from .taxonomy import AmbiguityCategory, Dimension, dimension_of, parse_category

logger = logging.getLogger(__name__)

SOURCES = ("BIRD", "TAG", "custom")


@dataclass(frozen=True)
class Annotation:
    phrase: str
    span: tuple[int, int]
    category: AmbiguityCategory
    gold_resolution: str


@dataclass(frozen=True)
class EvalCase:
    id: str
    source: str  # one of SOURCES
    database_id: str
    question: str
    gold_sql: str
    annotations: tuple[Annotation, ...]
    notes: str | None = None


def _canonical_source(raw: str, path: str) -> str:
    for source in SOURCES:
        if raw.lower() == source.lower():
            return source
    raise ValidationError(f"source must be one of {SOURCES}, got {raw!r}", path)


def load_dataset(path: str | Path) -> list[EvalCase]:
    """Load a JSONL dataset, one EvalCase per line.

    Raises:
        ValidationError: naming the case id and field path of the problem.
    """
    cases: list[EvalCase] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"invalid JSON: {exc}", f"line {line_no}") from exc
            case_id = raw.get("id")
            where = f"case {case_id or f'at line {line_no}'}"
            if not isinstance(case_id, str) or not case_id:
                raise ValidationError("non-empty string required", f"{where}.id")
            if case_id in seen_ids:
                raise ValidationError("duplicate case id", f"{where}.id")
            seen_ids.add(case_id)
            question = raw.get("question")
            if not isinstance(question, str) or not question.strip():
                raise ValidationError("non-empty string required", f"{where}.question")
            database_id = raw.get("database_id")
            if not isinstance(database_id, str) or not database_id:
                raise ValidationError("non-empty string required", f"{where}.database_id")
            source = _canonical_source(str(raw.get("source", "custom")), f"{where}.source")
            gold_sql = raw.get("gold_sql")
            if not isinstance(gold_sql, str):
                raise ValidationError("string required", f"{where}.gold_sql")
            try:
                canonicalize(gold_sql)
            except LexError as exc:
                raise ValidationError(f"gold_sql does not tokenize: {exc}", f"{where}.gold_sql") from exc
            annotations = []
            for i, raw_ann in enumerate(raw.get("annotations", [])):
                apath = f"{where}.annotations[{i}]"
                span = raw_ann.get("span")
                phrase = raw_ann.get("phrase")
                if (
                    not isinstance(span, list)
                    or len(span) != 2
                    or not all(isinstance(v, int) for v in span)
                ):
                    raise ValidationError("span must be [start, end]", f"{apath}.span")
                start, end = span
                if not 0 <= start < end <= len(question):
                    raise ValidationError("span out of bounds", f"{apath}.span")
                if not isinstance(phrase, str) or question[start:end].lower() != phrase.lower():
                    raise ValidationError(
                        f"span text {question[start:end]!r} does not match phrase {phrase!r}",
                        f"{apath}.phrase",
                    )
                try:
                    category = parse_category(str(raw_ann.get("category", "")))
                except UnknownCategory as exc:
                    raise ValidationError(str(exc), f"{apath}.category") from exc
                annotations.append(
                    Annotation(
                        phrase=phrase,
                        span=(start, end),
                        category=category,
                        gold_resolution=str(raw_ann.get("gold_resolution", "")),
                    )
                )
            cases.append(
                EvalCase(
                    id=case_id,
                    source=source,
                    database_id=database_id,
                    question=question,
                    gold_sql=gold_sql,
                    annotations=tuple(annotations),
                    notes=raw.get("notes"),
                )
            )
    return cases


# -- detection scoring -------------------------------------------------------


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __iadd__(self, other: "Counts") -> "Counts":
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        return self


def _overlap(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


def score_detection(
    detected: list[DetectedAmbiguity],
    annotated: list[Annotation],
) -> dict[AmbiguityCategory, Counts]:
    """Per-category tp/fp/fn via one-to-one span matching.

    A pair matches iff categories are equal and spans overlap by at least
    one character. Within each category the matching maximizes the number
    of matched pairs; edges are explored in descending overlap order (ties
    broken toward case-insensitive phrase equality) so behaviour is
    deterministic. Unmatched detections count as fp, unmatched
    annotations as fn.
    """
    counts: dict[AmbiguityCategory, Counts] = {}
    categories = {d.category for d in detected} | {a.category for a in annotated}
    for category in categories:
        det = [d for d in detected if d.category is category]
        ann = [a for a in annotated if a.category is category]
        edges: dict[int, list[int]] = {i: [] for i in range(len(det))}
        weighted = []
        for i, d in enumerate(det):
            for j, a in enumerate(ann):
                ov = _overlap(d.span, a.span)
                if ov > 0:
                    phrase_eq = d.phrase.lower() == a.phrase.lower()
                    weighted.append((-ov, 0 if phrase_eq else 1, i, j))
        weighted.sort()
        for _, _, i, j in weighted:
            edges[i].append(j)

        match_of_ann: dict[int, int] = {}

        def try_assign(i: int, visited: set[int]) -> bool:
            for j in edges[i]:
                if j in visited:
                    continue
                visited.add(j)
                if j not in match_of_ann or try_assign(match_of_ann[j], visited):
                    match_of_ann[j] = i
                    return True
            return False

        for i in range(len(det)):
            try_assign(i, set())
        tp = len(match_of_ann)
        counts[category] = Counts(tp=tp, fp=len(det) - tp, fn=len(ann) - tp)
    return counts


# -- report assembly ----------------------------------------------------------


@dataclass(frozen=True)
class MetricRow:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": percent(self.precision),
            "recall": percent(self.recall),
            "f1": percent(self.f1),
            "flags": list(self.flags),
        }


def percent(ratio: float) -> float:
    return round(100.0 * ratio, 2)


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean; scale-invariant, so it accepts ratios or percents."""
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _metric_row(c: Counts) -> MetricRow:
    flags = []
    if c.tp + c.fp == 0:
        precision = 0.0
        flags.append("precision_undefined")
    else:
        precision = c.tp / (c.tp + c.fp)
    if c.tp + c.fn == 0:
        recall = 0.0
        flags.append("recall_undefined")
    else:
        recall = c.tp / (c.tp + c.fn)
    if precision + recall == 0:
        flags.append("f1_undefined")
    return MetricRow(
        tp=c.tp,
        fp=c.fp,
        fn=c.fn,
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        flags=tuple(flags),
    )


@dataclass
class CaseResult:
    case_id: str
    source: str
    question_used: str
    sql: str | None
    exact: bool
    excluded: bool = False
    reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "source": self.source,
            "question_used": self.question_used,
            "sql": self.sql,
            "exact": self.exact,
            "excluded": self.excluded,
            "reason": self.reason,
        }


@dataclass
class MetricsReport:
    per_category: dict[str, MetricRow] = field(default_factory=dict)
    per_dimension: dict[str, MetricRow] = field(default_factory=dict)
    overall: MetricRow | None = None
    exact_match_accuracy: dict | None = None
    case_results: list[CaseResult] = field(default_factory=list)
    notes: tuple[str, ...] = ("phrase-level scoring; rollups micro-averaged from pooled counts",)

    def to_dict(self) -> dict:
        return {
            "per_category": {k: v.to_dict() for k, v in sorted(self.per_category.items())},
            "per_dimension": {k: v.to_dict() for k, v in sorted(self.per_dimension.items())},
            "overall": self.overall.to_dict() if self.overall else None,
            "exact_match_accuracy": self.exact_match_accuracy,
            "case_results": [c.to_dict() for c in self.case_results],
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def render_text(self) -> str:
        lines = []
        if self.exact_match_accuracy is not None:
            acc = self.exact_match_accuracy
            mode = "with" if acc["with_disambiguation"] else "without"
            lines.append(f"Exact match accuracy ({mode} disambiguation)")
            lines.append("-" * 46)
            overall = acc["overall"]
            lines.append(f"{'Overall':34s} {_fmt_pct(overall)}")
            for source in SOURCES:
                if source in acc["per_source"]:
                    lines.append(f"{source + ' samples':34s} {_fmt_pct(acc['per_source'][source])}")
            if acc.get("excluded"):
                lines.append(f"(excluded cases: {acc['excluded']})")
            lines.append("")
        if self.overall is not None:
            lines.append("Ambiguity detection")
            lines.append("-" * 62)
            lines.append(f"{'':34s} {'P':>8s} {'R':>8s} {'F1':>8s}")
            lines.append(_metric_line("Overall", self.overall))
            for dim in Dimension:
                row = self.per_dimension.get(dim.value)
                if row is None:
                    continue
                label = "DB-related" if dim is Dimension.DB_RELATED else "LLM-related"
                lines.append(_metric_line(label, row))
                for category in AmbiguityCategory:
                    if dimension_of(category) is not dim:
                        continue
                    crow = self.per_category.get(category.value)
                    if crow is not None:
                        lines.append(_metric_line("  " + category.value, crow))
        return "\n".join(lines)


def _fmt_pct(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.1f}%"


def _metric_line(label: str, row: MetricRow) -> str:
    return (
        f"{label:34s} {percent(row.precision):>7.1f}% {percent(row.recall):>7.1f}%"
        f" {percent(row.f1):>7.1f}%"
    )


def aggregate(outcomes: list[dict[AmbiguityCategory, Counts]]) -> MetricsReport:
    """Pool per-case counts into per-category, per-dimension, and overall rows."""
    pooled: dict[AmbiguityCategory, Counts] = {}
    for outcome in outcomes:
        for category, counts in outcome.items():
            pooled.setdefault(category, Counts())
            pooled[category] += counts
    per_dimension = {d: Counts() for d in Dimension}
    total = Counts()
    for category, counts in pooled.items():
        per_dimension[dimension_of(category)] += counts
        total += counts
    return MetricsReport(
        per_category={c.value: _metric_row(k) for c, k in pooled.items()},
        per_dimension={d.value: _metric_row(k) for d, k in per_dimension.items()},
        overall=_metric_row(total),
    )


# -- oracle user ---------------------------------------------------------------

_TOKEN = re.compile(r"[a-z0-9_]+")


def _tokens(text: str) -> set[str]:
    return set(_TOKEN.findall(text.lower()))


def oracle_answer(
    question: ClarificationQuestion,
    case: EvalCase,
    ambiguity: DetectedAmbiguity,
) -> UserAnswer:
    """Answer a clarification question from the case's gold annotations.

    Picks the option whose resolution shares the most tokens with the
    overlapping annotation's gold resolution. Zero overlap or a tie fails
    loudly instead of guessing.

    Raises:
        NoConfidentAnswer: nothing overlaps, overlap is zero, or two
            options tie for the best overlap.
    """
    overlapping = [a for a in case.annotations if _overlap(a.span, ambiguity.span) > 0]
    if not overlapping:
        raise NoConfidentAnswer(f"no annotation overlaps phrase {ambiguity.phrase!r}")
    annotation = max(overlapping, key=lambda a: _overlap(a.span, ambiguity.span))
    gold_tokens = _tokens(annotation.gold_resolution)
    scored = [(len(gold_tokens & _tokens(opt.resolution)), opt.key) for opt in question.options]
    best = max(score for score, _ in scored)
    if best < 1:
        raise NoConfidentAnswer(f"no option overlaps the gold resolution for {ambiguity.phrase!r}")
    winners = [key for score, key in scored if score == best]
    if len(winners) > 1:
        raise NoConfidentAnswer(
            f"options {winners} tie on gold-resolution overlap for {ambiguity.phrase!r}"
        )
    return UserAnswer(question_id=question.id, selected_key=winners[0])


# -- generator hooks ------------------------------------------------------------


class ScriptedHook:
    """Offline SQL generator: first 'generate' script entry matching the question."""

    def __init__(self, script_path: str | Path):
        self.entries = [e for e in load_script(script_path) if e.stage == "generate"]

    def generate(self, question: str, schema: SchemaModel, dialect: str) -> str:
        for entry in self.entries:
            if entry.match_substring in question:
                return entry.response
        raise HookError(f"no scripted SQL for question {question[:80]!r}")


class HttpHook:
    """POSTs {question, database_id, dialect, schema_descriptor} and expects {sql}."""

    def __init__(self, url: str, timeout_ms: int = 30_000):
        self.url = url
        self.timeout_ms = timeout_ms

    def generate(self, question: str, schema: SchemaModel, dialect: str) -> str:
        payload = {
            "question": question,
            "database_id": schema.database_id,
            "dialect": dialect,
            "schema_descriptor": to_descriptor(schema),
        }
        try:
            resp = httpx.post(self.url, json=payload, timeout=self.timeout_ms / 1000.0)
            resp.raise_for_status()
            sql = resp.json().get("sql")
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            raise HookError(f"generator endpoint failed: {exc}") from exc
        if not isinstance(sql, str) or not sql.strip():
            raise HookError("generator endpoint returned no sql")
        return sql


class GatewayHook:
    """Asks the gateway model itself to generate SQL."""

    def __init__(self, gateway: Gateway, schema_budget: int = 4000):
        self.gateway = gateway
        self.schema_budget = schema_budget

    def generate(self, question: str, schema: SchemaModel, dialect: str) -> str:
        request = build_generation_prompt(
            question, render_for_prompt(schema, self.schema_budget), dialect
        )
        try:
            return self.gateway.complete_structured(request, "text")
        except SqlClarifyError as exc:
            raise HookError(f"gateway generation failed: {exc}") from exc


# -- end-to-end runner -----------------------------------------------------------


def run_end_to_end(
    dataset: list[EvalCase],
    engine: DisambiguationEngine,
    schemas: dict[str, SchemaModel],
    hook,
    with_disambiguation: bool,
    comparator=exact_match,
) -> MetricsReport:
    """Per case: (optionally resolve, then) generate SQL and score exact match.

    Hook or resolution failures mark the case incorrect with a reason;
    oracle abstentions exclude the case from the accuracy denominator.
    Detection metrics are included when disambiguation runs.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    detection_outcomes: list[dict[AmbiguityCategory, Counts]] = []
    case_results: list[CaseResult] = []
    for case in dataset:
        schema = schemas.get(case.database_id)
        if schema is None:
            case_results.append(
                CaseResult(case.id, case.source, case.question, None, False, reason="unknown database")
            )
            continue
        question_used = case.question
        if with_disambiguation:
            try:
                detected = engine.detect(case.question, schema)
                detection_outcomes.append(score_detection(detected, list(case.annotations)))
                session = engine.new_session(f"eval-{case.id}", case.question, schema)

                def answer_all(questions: list[ClarificationQuestion]):
                    answers = [
                        oracle_answer(q, case, session.ambiguities[q.ambiguity_id])
                        for q in questions
                    ]
                    return answers, []

                session = engine.resolve_loop(session, answer_all)
            except NoConfidentAnswer as exc:
                case_results.append(
                    CaseResult(case.id, case.source, case.question, None, False, excluded=True, reason=str(exc))
                )
                continue
            except SqlClarifyError as exc:
                case_results.append(
                    CaseResult(case.id, case.source, case.question, None, False, reason=str(exc))
                )
                continue
            if session.state is not SessionState.RESOLVED:
                case_results.append(
                    CaseResult(case.id, case.source, case.question, None, False, reason="session did not resolve")
                )
                continue
            question_used = session.rewritten_question
        try:
            sql = hook.generate(question_used, schema, schema.dialect)
        except (HookError, NoScriptMatch) as exc:
            case_results.append(
                CaseResult(case.id, case.source, question_used, None, False, reason=f"hook failed: {exc}")
            )
            continue
        try:
            report = comparator(sql, case.gold_sql)
            exact = report.exact
            reason = None
        except LexError as exc:
            exact, reason = False, f"SQL does not tokenize: {exc}"
        case_results.append(CaseResult(case.id, case.source, question_used, sql, exact, reason=reason))

    scored = [c for c in case_results if not c.excluded]
    per_source: dict[str, float | None] = {}
    for source in SOURCES:
        subset = [c for c in scored if c.source == source]
        if subset:
            per_source[source] = percent(sum(c.exact for c in subset) / len(subset))
    accuracy = {
        "with_disambiguation": with_disambiguation,
        "overall": percent(sum(c.exact for c in scored) / len(scored)) if scored else None,
        "correct": sum(c.exact for c in scored),
        "scored": len(scored),
        "excluded": sum(c.excluded for c in case_results),
        "per_source": per_source,
    }
    if with_disambiguation and detection_outcomes:
        report = aggregate(detection_outcomes)
    else:
        report = MetricsReport()
    report.exact_match_accuracy = accuracy
    report.case_results = case_results
    return report

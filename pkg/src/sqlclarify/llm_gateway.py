"""Single choke point for model calls.

Builds the pipeline prompts (detection, clarification, refinement, merge),
runs them against either a live OpenAI-compatible endpoint or a scripted
offline backend, and parses structured output with one repair retry.

Prompt builders are pure: identical inputs yield byte-identical requests.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING

import httpx

from .errors import BackendUnavailable, NoScriptMatch, ParseFailure, ValidationError
from .taxonomy import AmbiguityCategory, Dimension, dimension_of, taxonomy_prompt_text

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .engine import ClarificationQuestion, DetectedAmbiguity, UserAnswer
    from .preferences import PreferenceEntry
    from .schema_catalog import SchemaSnippet

logger = logging.getLogger(__name__)

DEFAULT_MAX_OUTPUT_TOKENS = 1024
BACKOFF_BASE_S = 0.25  # patched down in tests

REPAIR_INSTRUCTION = (
    "\n\nREPAIR: your previous reply could not be parsed."
    " Reply again with ONLY the required output format and nothing else."
)


class Stage(str, Enum):
    DETECT = "detect"
    CLARIFY = "clarify"
    REFINE = "refine"
    MERGE = "merge"
    GENERATE = "generate"


@dataclass(frozen=True)
class PromptRequest:
    stage: Stage
    system_text: str
    user_text: str
    temperature: float = 0.0
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS

    def __post_init__(self):
        if self.stage is not Stage.GENERATE and self.temperature != 0.0:
            raise ValueError(f"{self.stage.value} requests must use temperature 0")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be in [0, 1]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class Completion:
    text: str
    backend_id: str
    latency_ms: int = 0


@dataclass(frozen=True)
class BackendConfig:
    mode: str  # "live" | "scripted"
    base_url: str | None = None
    model_name: str | None = None
    api_key_ref: str | None = None
    timeout_ms: int = 30_000
    max_retries: int = 2
    script_path: str | None = None

    def validate(self) -> None:
        if self.mode not in ("live", "scripted"):
            raise ValidationError(f"unknown backend mode {self.mode!r}", "mode")
        if self.timeout_ms < 1:
            raise ValidationError("timeout_ms must be positive", "timeout_ms")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be non-negative", "max_retries")
        if self.mode == "live":
            for name in ("base_url", "model_name", "api_key_ref"):
                if not getattr(self, name):
                    raise ValidationError(f"live mode requires {name}", name)
        else:
            if not self.script_path:
                raise ValidationError("scripted mode requires script_path", "script_path")

    @classmethod
    def from_env(cls, env: dict | None = None, default_script: str | None = None) -> "BackendConfig":
        """Build a config from AMBI_* environment variables.

        When AMBI_LLM_MODE is unset, scripted mode with ``default_script``
        (the bundled fixture script, normally) is assumed.
        """
        env = dict(os.environ if env is None else env)
        mode = env.get("AMBI_LLM_MODE", "scripted").strip().lower()
        return cls(
            mode=mode,
            base_url=env.get("AMBI_LLM_BASE_URL"),
            model_name=env.get("AMBI_LLM_MODEL"),
            api_key_ref="AMBI_LLM_API_KEY" if env.get("AMBI_LLM_API_KEY") else None,
            timeout_ms=int(env.get("AMBI_LLM_TIMEOUT_MS", "30000")),
            max_retries=int(env.get("AMBI_LLM_MAX_RETRIES", "2")),
            script_path=env.get("AMBI_SCRIPT_PATH", default_script),
        )


@dataclass
class ScriptEntry:
    stage: str
    match_substring: str
    response: str
    consume_once: bool = False


def load_script(path: str | Path) -> list[ScriptEntry]:
    """Load a scripted-backend file: a JSON list of entries.

    Raises:
        ValidationError: on malformed entries or duplicate (stage, substring) pairs.
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise ValidationError("script must be a JSON list", str(path))
    entries = []
    seen: set[tuple[str, str]] = set()
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or not isinstance(item.get("stage"), str) \
                or not isinstance(item.get("match_substring"), str) \
                or not isinstance(item.get("response"), str):
            raise ValidationError("entry needs stage/match_substring/response strings", f"[{i}]")
        key = (item["stage"], item["match_substring"])
        if key in seen:
            raise ValidationError(f"duplicate (stage, match_substring) {key!r}", f"[{i}]")
        seen.add(key)
        entries.append(
            ScriptEntry(
                stage=item["stage"],
                match_substring=item["match_substring"],
                response=item["response"],
                consume_once=bool(item.get("consume_once", False)),
            )
        )
    return entries


class _TokenBucket:
    """Minimal token bucket; acquire() blocks until a token is available."""

    def __init__(self, rate_per_sec: float, burst: int = 1):
        self.rate = rate_per_sec
        self.capacity = max(1, burst)
        self.tokens = float(self.capacity)
        self.updated = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            time.sleep(wait)


class Gateway:
    """Thread-safe entry point for completions against one backend.

    Counts HTTP calls so tests can assert that scripted runs never touch
    the network.
    """

    def __init__(self, config: BackendConfig, rate_per_sec: float | None = None):
        config.validate()
        self.config = config
        self.http_calls = 0
        self.completions = 0
        self._bucket = _TokenBucket(rate_per_sec) if rate_per_sec else None
        self._lock = threading.Lock()
        self._entries: list[ScriptEntry] = []
        self._consumed: set[int] = set()
        if config.mode == "scripted":
            self._entries = load_script(config.script_path)

    def complete(self, request: PromptRequest) -> Completion:
        """Run one completion. Scripted mode never performs network I/O."""
        if self._bucket is not None:
            self._bucket.acquire()
        started = time.monotonic()
        if self.config.mode == "scripted":
            text = self._scripted(request)
            backend_id = f"scripted:{Path(self.config.script_path).name}"
        else:
            text = self._live(request)
            backend_id = f"live:{self.config.model_name}"
        with self._lock:
            self.completions += 1
        return Completion(
            text=text,
            backend_id=backend_id,
            latency_ms=int((time.monotonic() - started) * 1000),
        )

    def complete_structured(self, request: PromptRequest, expected: str):
        """Complete and parse; on a parse failure, retry once with a repair hint.

        Raises:
            ParseFailure: if the repaired completion still does not parse.
        """
        completion = self.complete(request)
        try:
            return parse_structured(completion, expected)
        except ParseFailure:
            logger.warning("unparseable %s output; issuing repair retry", request.stage.value)
        repaired = replace(request, user_text=request.user_text + REPAIR_INSTRUCTION)
        return parse_structured(self.complete(repaired), expected)

    # -- backends ---------------------------------------------------------

    def _scripted(self, request: PromptRequest) -> str:
        with self._lock:
            for i, entry in enumerate(self._entries):
                if i in self._consumed:
                    continue
                if entry.stage != request.stage.value:
                    continue
                if entry.match_substring in request.user_text:
                    if entry.consume_once:
                        self._consumed.add(i)
                    return entry.response
        raise NoScriptMatch(
            f"no scripted entry for stage={request.stage.value!r};"
            f" user_text starts {request.user_text[:80]!r}"
        )

    def _live(self, request: PromptRequest) -> str:
        api_key = os.environ.get(self.config.api_key_ref or "", "")
        payload = {
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        last_error = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(BACKOFF_BASE_S * 2 ** (attempt - 1))
            try:
                status, body = self._http_send(url, headers, payload)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
                continue
            if status >= 500:
                last_error = f"server error {status}"
                continue
            if status >= 400:
                raise BackendUnavailable(f"backend rejected request: {status} {body[:200]}")
            try:
                return json.loads(body)["choices"][0]["message"]["content"] or ""
            except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
                raise BackendUnavailable(f"malformed backend response: {exc}") from exc
        raise BackendUnavailable(f"retries exhausted: {last_error}")

    def _http_send(self, url: str, headers: dict, payload: dict) -> tuple[int, str]:
        with self._lock:
            self.http_calls += 1
        timeout = self.config.timeout_ms / 1000.0
        with httpx.Client(timeout=timeout) as client:
            resp = client.post(url, headers=headers, json=payload)
        return resp.status_code, resp.text


# -- structured-output parsing ---------------------------------------------

_FENCE = re.compile(r"```[a-zA-Z]*\n(.*?)```", re.DOTALL)


def _json_candidates(text: str) -> list[str]:
    candidates = [text.strip()]
    candidates.extend(m.group(1).strip() for m in _FENCE.finditer(text))
    for opener, closer in (("[", "]"), ("{", "}")):
        start = text.find(opener)
        end = text.rfind(closer)
        if 0 <= start < end:
            candidates.append(text[start : end + 1])
    return candidates


def _strip_fences(text: str) -> str:
    m = _FENCE.search(text)
    return m.group(1) if m else text


def parse_structured(completion: Completion, expected: str):
    """Extract the first well-formed structured block of the expected kind.

    Kinds: ``detection`` (list of phrase/category_label/rationale objects),
    ``clarification`` (question with options), ``line`` (single line of
    text), ``text`` (whole reply, fences stripped).

    Raises:
        ParseFailure: if no candidate block matches the expected shape.
    """
    text = completion.text
    if expected == "line":
        stripped = _strip_fences(text)
        for line in stripped.splitlines():
            if line.strip():
                return line.strip()
        raise ParseFailure("expected one line of text, got an empty reply")
    if expected == "text":
        stripped = _strip_fences(text).strip()
        if not stripped:
            raise ParseFailure("expected text, got an empty reply")
        return stripped

    for candidate in _json_candidates(text):
        try:
            value = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if expected == "detection" and _valid_detection(value):
            return [
                {
                    "phrase": item["phrase"],
                    "category_label": item["category_label"],
                    "rationale": str(item.get("rationale", "")),
                }
                for item in value
            ]
        if expected == "clarification" and _valid_clarification(value):
            return value
    raise ParseFailure(f"no well-formed {expected} block in completion")


def _valid_detection(value) -> bool:
    return isinstance(value, list) and all(
        isinstance(item, dict)
        and isinstance(item.get("phrase"), str)
        and isinstance(item.get("category_label"), str)
        for item in value
    )


def _valid_clarification(value) -> bool:
    if not isinstance(value, dict) or not isinstance(value.get("question"), str):
        return False
    options = value.get("options")
    if not isinstance(options, list) or not options:
        return False
    return all(
        isinstance(o, dict)
        and isinstance(o.get("key"), str)
        and isinstance(o.get("display"), str)
        and isinstance(o.get("resolution"), str)
        for o in options
    )


# -- prompt builders --------------------------------------------------------

_DETECTION_SYSTEM = """You identify ambiguous phrases in natural-language questions asked against a database.

An ambiguous phrase is a substring of the question that admits more than one plausible interpretation when translating the question into SQL: either in how it maps to schema elements and stored values, or in how it should be reasoned about.

Categories (use these labels exactly):
{taxonomy}

Worked examples:
- Question: "Which city is the largest one?"
  Reply: [{{"phrase": "largest", "category_label": "unclear_schema_reference", "rationale": "The user does not specify whether largest refers to an area column or a population column."}}]
- Question: "How many matches were played right after the 2018 World Cup?"
  Reply: [{{"phrase": "right after the 2018 World Cup", "category_label": "ambiguous_temporal_spatial_scope", "rationale": "Could mean after the final match or after the tournament year."}}]

Reply with a JSON list, one object per ambiguous phrase:
[{{"phrase": "...", "category_label": "...", "rationale": "..."}}]
"phrase" must be copied verbatim from the question. "category_label" must be one of the labels above. Reply with [] when nothing is ambiguous. No prose outside the JSON."""

_CLARIFY_SYSTEM = """You turn one detected ambiguity into a single multiple-choice clarification question for a non-expert user.

Produce between 2 and 6 options with keys "A", "B", ... Each option carries:
- "display": short text shown to the user,
- "resolution": one standalone declarative sentence that can be inserted verbatim into a rewritten question.
For database-mapping ambiguities, base the options on the evidence snippets and include the table and column each option relies on. For temporal or spatial scope ambiguities, offer options at distinct granularities and state the exact time reference (an exact date or a year) in both the display and the resolution.

Reply with JSON only:
{"question": "...", "options": [{"key": "A", "display": "...", "resolution": "...", "table": "...", "column": "..."}]}
"table" and "column" are optional and only for options grounded in a specific column."""

_REFINE_SYSTEM = """You rewrite a database question so that it is unambiguous.

Rules:
- Inline each selected clarification resolution sentence verbatim into the rewrite.
- Append every additional constraint verbatim.
- If an additional constraint conflicts with the original question or with a clarification, prioritize and retain the constraint specified in the additional constraints.
- If there are no answers and no additional constraints, return the question unchanged.

Reply with exactly one line containing only the rewritten question."""

_MERGE_SYSTEM = """Two recorded user preferences about the same target conflict and must be merged.

A conflict means the two resolutions cannot both hold at once (they bind the same phrase to different columns, values, dates, or sources). Merge them into a single resolution that reflects the NEWER preference's intent; keep any details from the older one that do not contradict it.

Worked example: the stored preference says driver ranking uses the "position" column, and the new preference says it uses the "rank" column. Merged result: driver ranking uses the "rank" column.

Reply with exactly one line: the merged resolution sentence."""

_GENERATE_SYSTEM = """You translate an unambiguous natural-language question into a single SQL query for the given schema and dialect.

Reply with the SQL statement only, no prose."""


def build_detection_prompt(
    question: str,
    schema_text: str,
    preferences_text: str = "",
) -> PromptRequest:
    """Prompt asking for the list of ambiguous phrases in ``question``.

    ``preferences_text`` carries already-recorded clarifications so that
    re-detection passes do not re-flag settled phrases.
    """
    if not question:
        raise ValueError("question must be non-empty")
    user = f"QUESTION: {question}\n\nSCHEMA:\n{schema_text}\n"
    if preferences_text:
        user += f"\nPREFERENCES ALREADY RECORDED (do not re-flag these):\n{preferences_text}\n"
    user += "\nIdentify the ambiguous phrases. Reply with the JSON list only."
    return PromptRequest(
        stage=Stage.DETECT,
        system_text=_DETECTION_SYSTEM.format(taxonomy=taxonomy_prompt_text()),
        user_text=user,
    )


def build_clarification_prompt(
    ambiguity: "DetectedAmbiguity",
    evidence: list["SchemaSnippet"],
    question: str,
) -> PromptRequest:
    """Prompt asking for one multiple-choice question resolving ``ambiguity``."""
    lines = [
        f"QUESTION: {question}",
        f"PHRASE: {ambiguity.phrase}",
        f"CATEGORY: {ambiguity.category.value}",
        f"RATIONALE: {ambiguity.rationale}",
    ]
    if dimension_of(ambiguity.category) is Dimension.DB_RELATED and evidence:
        lines.append("EVIDENCE SNIPPETS:")
        for snip in evidence:
            desc = f" -- {snip.description}" if snip.description else ""
            values = ", ".join(snip.values)
            lines.append(f"- {snip.table}.{snip.column}{desc} (values: {values})")
    if ambiguity.category is AmbiguityCategory.AMBIGUOUS_TEMPORAL_SPATIAL_SCOPE:
        lines.append(
            "Offer interpretations at distinct granularities (for example start"
            " date, end date, or year), each annotated with the exact time reference."
        )
    lines.append("Write the clarification question. Reply with the JSON object only.")
    return PromptRequest(
        stage=Stage.CLARIFY,
        system_text=_CLARIFY_SYSTEM,
        user_text="\n".join(lines),
    )


def build_refinement_prompt(
    question: str,
    answers: list[tuple["ClarificationQuestion", "UserAnswer"]],
    constraints: list[str],
) -> PromptRequest:
    """Prompt asking for the rewritten question given answers and constraints."""
    lines = [f"QUESTION: {question}"]
    if answers:
        lines.append("\nANSWERS:")
        for q, a in answers:
            option = next(o for o in q.options if o.key == a.selected_key)
            lines.append(f"- {q.text} -> {option.resolution}")
    if constraints:
        lines.append("\nADDITIONAL CONSTRAINTS:")
        for c in constraints:
            lines.append(f"- {c}")
    if not answers and not constraints:
        lines.append("\nThere are no answers and no additional constraints; return the question unchanged.")
    lines.append("\nReply with the rewritten question on one line.")
    return PromptRequest(
        stage=Stage.REFINE,
        system_text=_REFINE_SYSTEM,
        user_text="\n".join(lines),
    )


def build_merge_prompt(existing: "PreferenceEntry", incoming: "PreferenceEntry") -> PromptRequest:
    """Prompt asking for the merged resolution of two conflicting preferences."""
    user = (
        f"TARGET: {existing.target_key}\n"
        f"EXISTING (older, version {existing.version}): {existing.resolution}\n"
        f"INCOMING (newer): {incoming.resolution}\n"
        "\nReply with the merged resolution on one line."
    )
    return PromptRequest(stage=Stage.MERGE, system_text=_MERGE_SYSTEM, user_text=user)


def build_generation_prompt(question: str, schema_text: str, dialect: str) -> PromptRequest:
    """Prompt asking the gateway model itself to produce SQL (fallback hook)."""
    user = f"DIALECT: {dialect}\nQUESTION: {question}\n\nSCHEMA:\n{schema_text}\n\nReply with the SQL only."
    return PromptRequest(stage=Stage.GENERATE, system_text=_GENERATE_SYSTEM, user_text=user)

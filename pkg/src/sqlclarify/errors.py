"""Exception types shared across the package."""

from __future__ import annotations


class SqlClarifyError(Exception):
    """Base class for all package-specific errors."""


class UnknownCategory(SqlClarifyError):
    """A label does not name any taxonomy category."""


class FormatError(SqlClarifyError):
    """A file is readable but not in the expected format."""


class ValidationError(SqlClarifyError):
    """A structured document violates its schema.

    ``path`` points at the offending field, e.g. ``tables[1].columns[0].name``.
    """

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class UnknownColumn(SqlClarifyError):
    """A referenced table/column pair does not exist in the schema."""


class BackendUnavailable(SqlClarifyError):
    """The live LLM backend failed after all retries."""


class NoScriptMatch(SqlClarifyError):
    """No scripted entry matches a request; the fixture script has a gap."""


class ParseFailure(SqlClarifyError):
    """A completion could not be parsed as structured output, even after repair."""


class DetectionFailure(SqlClarifyError):
    """The ambiguity detection pass failed (gateway or parse error)."""


class ClarificationFailure(SqlClarifyError):
    """A clarification question could not be generated for one ambiguity."""


class RefinementFailure(SqlClarifyError):
    """The question rewrite step failed (gateway or parse error)."""


class StaleAnswer(SqlClarifyError):
    """An answer references a question id that is not currently open."""


class PartialAnswers(SqlClarifyError):
    """Not every open clarification question received an answer."""

    def __init__(self, missing_ids: list[str]):
        super().__init__(f"unanswered questions: {', '.join(missing_ids)}")
        self.missing_ids = list(missing_ids)


class UnknownOptionKey(SqlClarifyError):
    """A selected option key is not among the question's options."""


class SessionStateError(SqlClarifyError):
    """An operation was attempted in the wrong session state."""


class MaxIterationsExceeded(SqlClarifyError):
    """The clarification loop hit its iteration cap without resolving."""


class LexError(SqlClarifyError):
    """SQL text could not be tokenized; ``offset`` is the byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ExecError(SqlClarifyError):
    """Executing one side of an execution-match comparison failed."""

    def __init__(self, side: str, message: str):
        super().__init__(f"{side}: {message}")
        self.side = side
        self.detail = message


class NoConfidentAnswer(SqlClarifyError):
    """The evaluation oracle cannot pick an option without guessing."""


class HookError(SqlClarifyError):
    """The downstream SQL generator hook failed."""

"""Taxonomy-indexed preference tree.

User clarifications are stored under their ambiguity category. Within a
leaf at most one entry per target key is live; recording a conflicting
entry merges it with the existing one (model-assisted, with a
deterministic latest-wins fallback), bumps the version, and keeps the
superseded entry for audit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

from .errors import ParseFailure, SqlClarifyError, ValidationError
from .llm_gateway import Gateway, build_merge_prompt
from .schema_catalog import SchemaSnippet
from .taxonomy import AmbiguityCategory, Dimension, dimension_of

logger = logging.getLogger(__name__)


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class PreferenceEntry:
    target_key: str
    resolution: str
    version: int = 1
    source_question_id: str = ""
    recorded_at: str = ""
    superseded: bool = False


def normalize_key(target_key: str) -> str:
    return target_key.strip().lower()


def derive_target_key(
    category: AmbiguityCategory,
    phrase: str,
    snippet: SchemaSnippet | None = None,
) -> str:
    """Conflict identity for a clarification answer.

    Keys combine the category's kind with the detected phrase, so a later
    answer about the same phrase (e.g. switching a ranking from one column
    to another) supersedes the earlier one. The snippet argument is
    accepted for call-site symmetry; identity stays phrase-based so that
    choosing a different column still lands on the same key.
    """
    p = normalize_key(phrase)
    if category is AmbiguityCategory.UNCLEAR_SCHEMA_REFERENCE:
        return f"column:{p}"
    if category is AmbiguityCategory.UNCLEAR_VALUE_REFERENCE:
        return f"value:{p}"
    if category is AmbiguityCategory.MISSING_SQL_KEYWORDS:
        return f"keyword:{p}"
    if category is AmbiguityCategory.AMBIGUOUS_TEMPORAL_SPATIAL_SCOPE:
        return f"temporal:{p}"
    return f"knowledge:{p}"


@dataclass
class PreferenceTree:
    """Mapping from category to its (live and superseded) entries."""

    leaves: dict[AmbiguityCategory, list[PreferenceEntry]] = field(
        default_factory=lambda: {c: [] for c in AmbiguityCategory}
    )

    @classmethod
    def empty(cls) -> "PreferenceTree":
        return cls()


def record(
    tree: PreferenceTree,
    category: AmbiguityCategory,
    entry: PreferenceEntry,
    gateway: Gateway | None = None,
) -> PreferenceTree:
    """Insert a clarification, merging on conflict with any live entry.

    A fresh target key is stored as version 1. A conflicting key goes
    through merge(); the merged entry gets the next version and the old
    one is kept but marked superseded.
    """
    if not entry.target_key.strip():
        raise ValidationError("target_key must be non-empty", "target_key")
    key = normalize_key(entry.target_key)
    entry = replace(entry, target_key=key, recorded_at=entry.recorded_at or now_iso())
    leaf = tree.leaves[category]
    existing_idx = next(
        (i for i, e in enumerate(leaf) if not e.superseded and e.target_key == key),
        None,
    )
    if existing_idx is None:
        leaf.append(replace(entry, version=1, superseded=False))
        return tree
    existing = leaf[existing_idx]
    merged = merge(existing, entry, gateway)
    leaf[existing_idx] = replace(existing, superseded=True)
    leaf.append(replace(merged, version=existing.version + 1, superseded=False))
    return tree


def merge(
    existing: PreferenceEntry,
    incoming: PreferenceEntry,
    gateway: Gateway | None = None,
) -> PreferenceEntry:
    """Resolve a conflict between two entries for the same target key.

    Tries a model merge; on any gateway or parse failure falls back to the
    deterministic rule that the incoming entry wins wholesale. The result
    always carries the incoming entry's source question id.
    """
    if normalize_key(existing.target_key) != normalize_key(incoming.target_key):
        raise ValidationError("entries must share a target_key", "target_key")
    if gateway is None:
        return incoming
    try:
        line = gateway.complete_structured(build_merge_prompt(existing, incoming), "line")
        return replace(incoming, resolution=line)
    except (SqlClarifyError, ParseFailure) as exc:
        logger.info("merge fell back to latest-wins: %s", exc)
        return incoming


def lookup(tree: PreferenceTree, category: AmbiguityCategory) -> list[PreferenceEntry]:
    """Live entries for one category, in insertion order."""
    return [e for e in tree.leaves[category] if not e.superseded]


def render_for_prompt(tree: PreferenceTree) -> str:
    """Compact text form of all live entries, grouped by dimension."""
    lines = []
    for dim in Dimension:
        for category in AmbiguityCategory:
            if dimension_of(category) is not dim:
                continue
            for e in lookup(tree, category):
                lines.append(f"- [{category.value}] {e.target_key}: {e.resolution}")
    return "\n".join(lines)


def snapshot(tree: PreferenceTree) -> dict:
    """Serializable document: all 7 category keys, history included."""
    return {
        category.value: [
            {
                "target_key": e.target_key,
                "resolution": e.resolution,
                "version": e.version,
                "superseded": e.superseded,
                "source_question_id": e.source_question_id,
                "recorded_at": e.recorded_at,
            }
            for e in tree.leaves[category]
        ]
        for category in AmbiguityCategory
    }


def load(doc: dict) -> PreferenceTree:
    """Rebuild a tree from snapshot(); inverse up to structural equality.

    Raises:
        ValidationError: on missing category keys or malformed entries.
    """
    if not isinstance(doc, dict):
        raise ValidationError("snapshot must be an object", "")
    tree = PreferenceTree.empty()
    for category in AmbiguityCategory:
        if category.value not in doc:
            raise ValidationError("missing category key", category.value)
        raw_entries = doc[category.value]
        if not isinstance(raw_entries, list):
            raise ValidationError("list required", category.value)
        for i, raw in enumerate(raw_entries):
            path = f"{category.value}[{i}]"
            if not isinstance(raw, dict):
                raise ValidationError("object required", path)
            try:
                entry = PreferenceEntry(
                    target_key=raw["target_key"],
                    resolution=raw["resolution"],
                    version=int(raw["version"]),
                    source_question_id=raw.get("source_question_id", ""),
                    recorded_at=raw.get("recorded_at", ""),
                    superseded=bool(raw["superseded"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"malformed entry: {exc}", path) from exc
            if not isinstance(entry.target_key, str) or not isinstance(entry.resolution, str):
                raise ValidationError("target_key and resolution must be strings", path)
            if entry.version < 1:
                raise ValidationError("version must be positive", f"{path}.version")
            tree.leaves[category].append(entry)
    return tree

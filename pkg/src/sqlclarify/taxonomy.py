"""The closed ambiguity taxonomy: two dimensions, seven categories.

This taxonomy drives prompt construction, validation of model output,
detection scoring, and the layout of the preference tree. It is a closed
set; categories cannot be added at runtime.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import UnknownCategory


class Dimension(str, Enum):
    """Whether an ambiguity concerns database mapping or model reasoning."""

    DB_RELATED = "db_related"
    LLM_RELATED = "llm_related"


class AmbiguityCategory(str, Enum):
    """The seven ambiguity categories; values are the stable serialized labels."""

    UNCLEAR_SCHEMA_REFERENCE = "unclear_schema_reference"
    UNCLEAR_VALUE_REFERENCE = "unclear_value_reference"
    MISSING_SQL_KEYWORDS = "missing_sql_keywords"
    UNCLEAR_KNOWLEDGE_SOURCE = "unclear_knowledge_source"
    INSUFFICIENT_REASONING_CONTEXT = "insufficient_reasoning_context"
    CONFLICTING_KNOWLEDGE = "conflicting_knowledge"
    AMBIGUOUS_TEMPORAL_SPATIAL_SCOPE = "ambiguous_temporal_spatial_scope"


@dataclass(frozen=True)
class CategoryCard:
    """Definition and one worked exemplar for a category, used in prompts."""

    category: AmbiguityCategory
    dimension: Dimension
    definition: str
    exemplar: str


_DIMENSION_OF: dict[AmbiguityCategory, Dimension] = {
    AmbiguityCategory.UNCLEAR_SCHEMA_REFERENCE: Dimension.DB_RELATED,
    AmbiguityCategory.UNCLEAR_VALUE_REFERENCE: Dimension.DB_RELATED,
    AmbiguityCategory.MISSING_SQL_KEYWORDS: Dimension.DB_RELATED,
    AmbiguityCategory.UNCLEAR_KNOWLEDGE_SOURCE: Dimension.LLM_RELATED,
    AmbiguityCategory.INSUFFICIENT_REASONING_CONTEXT: Dimension.LLM_RELATED,
    AmbiguityCategory.CONFLICTING_KNOWLEDGE: Dimension.LLM_RELATED,
    AmbiguityCategory.AMBIGUOUS_TEMPORAL_SPATIAL_SCOPE: Dimension.LLM_RELATED,
}

_CARDS: dict[AmbiguityCategory, CategoryCard] = {
    AmbiguityCategory.UNCLEAR_SCHEMA_REFERENCE: CategoryCard(
        category=AmbiguityCategory.UNCLEAR_SCHEMA_REFERENCE,
        dimension=Dimension.DB_RELATED,
        definition=(
            "The question does not pin down which table or column an operation "
            "such as filtering, ranking, or aggregation should use, so several "
            "schema mappings are plausible."
        ),
        exemplar=(
            "Asking for the 'oldest user' is ambiguous because it could rank "
            "users by an age column or by their registration date."
        ),
    ),
    AmbiguityCategory.UNCLEAR_VALUE_REFERENCE: CategoryCard(
        category=AmbiguityCategory.UNCLEAR_VALUE_REFERENCE,
        dimension=Dimension.DB_RELATED,
        definition=(
            "The question names a value that does not match how values are "
            "actually stored, leaving the WHERE condition underdetermined and "
            "risking missed or wrong rows."
        ),
        exemplar=(
            "Asking for rows about 'New York City' when the database stores "
            "'NYC', or for posts about 'COVID-19' when the stored tag is "
            "'coronavirus'."
        ),
    ),
    AmbiguityCategory.MISSING_SQL_KEYWORDS: CategoryCard(
        category=AmbiguityCategory.MISSING_SQL_KEYWORDS,
        dimension=Dimension.DB_RELATED,
        definition=(
            "Terms that would fix the intended SQL operation are absent, so "
            "sorting, grouping, and filtering readings all remain possible."
        ),
        exemplar=(
            "'Show me users by registration date' could mean ORDER BY for "
            "sorting, GROUP BY for grouping, or WHERE for filtering."
        ),
    ),
    AmbiguityCategory.UNCLEAR_KNOWLEDGE_SOURCE: CategoryCard(
        category=AmbiguityCategory.UNCLEAR_KNOWLEDGE_SOURCE,
        dimension=Dimension.LLM_RELATED,
        definition=(
            "It is unclear whether the needed information should be read from "
            "database content or inferred by model reasoning on top of it."
        ),
        exemplar=(
            "For 'female employees' the system could query a gender column or "
            "semantically analyze name fields instead."
        ),
    ),
    AmbiguityCategory.INSUFFICIENT_REASONING_CONTEXT: CategoryCard(
        category=AmbiguityCategory.INSUFFICIENT_REASONING_CONTEXT,
        dimension=Dimension.LLM_RELATED,
        definition=(
            "The question omits context the model would need to reason its way "
            "to a single answer."
        ),
        exemplar=(
            "Asking for the 'current exchange rate' without the currency pair "
            "or date cannot be resolved to one number."
        ),
    ),
    AmbiguityCategory.CONFLICTING_KNOWLEDGE: CategoryCard(
        category=AmbiguityCategory.CONFLICTING_KNOWLEDGE,
        dimension=Dimension.LLM_RELATED,
        definition=(
            "An assumption embedded in the question contradicts real-world "
            "facts or the stored data."
        ),
        exemplar=(
            "Asking who participated in an event that never occurred."
        ),
    ),
    AmbiguityCategory.AMBIGUOUS_TEMPORAL_SPATIAL_SCOPE: CategoryCard(
        category=AmbiguityCategory.AMBIGUOUS_TEMPORAL_SPATIAL_SCOPE,
        dimension=Dimension.LLM_RELATED,
        definition=(
            "A time or place constraint admits several granularities or "
            "boundaries, each producing a different query."
        ),
        exemplar=(
            "'after the 2018 World Cup' could mean immediately after the final "
            "match or after the entire tournament year."
        ),
    ),
}

_SEPARATORS = re.compile(r"[\s/\-]+")


def serialized_label(category: AmbiguityCategory) -> str:
    """Return the stable snake_case label for a category."""
    return category.value


def parse_category(label: str) -> AmbiguityCategory:
    """Parse a category label, tolerating case and separator variations.

    Accepts spaces, hyphens, or '/' in place of underscores (so the prose
    form "Ambiguous temporal/spatial scope" parses), but never guesses a
    category from free text.

    Raises:
        UnknownCategory: if the normalized label matches no variant.
    """
    normalized = _SEPARATORS.sub("_", label.strip().lower()).strip("_")
    normalized = re.sub(r"_+", "_", normalized)
    try:
        return AmbiguityCategory(normalized)
    except ValueError:
        raise UnknownCategory(f"not a taxonomy category: {label!r}") from None


def dimension_of(category: AmbiguityCategory) -> Dimension:
    """Return the dimension a category belongs to (total mapping)."""
    return _DIMENSION_OF[category]


def category_card(category: AmbiguityCategory) -> CategoryCard:
    """Return the constant definition card for a category."""
    return _CARDS[category]


def all_cards() -> tuple[CategoryCard, ...]:
    """All seven cards, DB-related first, in declaration order."""
    return tuple(_CARDS[c] for c in AmbiguityCategory)


def categories_in(dimension: Dimension) -> tuple[AmbiguityCategory, ...]:
    """Categories belonging to one dimension, in declaration order."""
    return tuple(c for c in AmbiguityCategory if _DIMENSION_OF[c] is dimension)


def taxonomy_prompt_text() -> str:
    """Render every card for prompt use; each label appears exactly once."""
    lines = []
    for card in all_cards():
        dim = "DB-related" if card.dimension is Dimension.DB_RELATED else "LLM-related"
        lines.append(f"- {card.category.value} ({dim}): {card.definition}")
        lines.append(f"  Example: {card.exemplar}")
    return "\n".join(lines)

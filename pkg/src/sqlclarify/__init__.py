"""Interactive ambiguity detection and clarification for text-to-SQL."""

from .engine import (
    ClarificationOption,
    ClarificationQuestion,
    DetectedAmbiguity,
    DisambiguationEngine,
    Session,
    SessionState,
    UserAnswer,
)
from .llm_gateway import BackendConfig, Gateway, PromptRequest, Stage
from .schema_catalog import SchemaModel, SchemaSnippet, ingest_database_file, ingest_descriptor
from .sql_compare import ComparisonReport, canonicalize, exact_match, execution_match
from .taxonomy import AmbiguityCategory, Dimension, category_card, dimension_of, parse_category

__version__ = "0.1.0"

__all__ = [
    "AmbiguityCategory",
    "BackendConfig",
    "ClarificationOption",
    "ClarificationQuestion",
    "ComparisonReport",
    "DetectedAmbiguity",
    "Dimension",
    "DisambiguationEngine",
    "Gateway",
    "PromptRequest",
    "SchemaModel",
    "SchemaSnippet",
    "Session",
    "SessionState",
    "Stage",
    "UserAnswer",
    "canonicalize",
    "category_card",
    "dimension_of",
    "exact_match",
    "execution_match",
    "ingest_database_file",
    "ingest_descriptor",
    "parse_category",
    "__version__",
]

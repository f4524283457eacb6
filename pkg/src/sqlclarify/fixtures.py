"""Access to the bundled fixture databases, script, and dataset.

These power the example catalog, the offline demo, and the test suite.
The SQLite fixture ships as a SQL text file and is materialized on
demand so the package carries no binary database.
"""

from __future__ import annotations

import sqlite3
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .evaluation import load_dataset
from .schema_catalog import SchemaModel, ingest_database_file, load_descriptor_file

FIXTURES_DIR = Path(__file__).parent / "fixtures"

DESCRIPTOR_FILES = (
    "california_schools.json",
    "codebase_community.json",
    "debit_card_specializing.json",
)


def bundled_script_path() -> Path:
    return FIXTURES_DIR / "script.json"


def bundled_dataset_path() -> Path:
    return FIXTURES_DIR / "cases.jsonl"


def build_formula_one_db(dest: str | Path) -> Path:
    """Materialize the motorsport fixture database at ``dest``."""
    dest = Path(dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    if dest.exists():
        dest.unlink()
    con = sqlite3.connect(dest)
    try:
        con.executescript((FIXTURES_DIR / "formula_one.sql").read_text(encoding="utf-8"))
        con.commit()
    finally:
        con.close()
    return dest


@dataclass
class Example:
    example_id: str
    label: str
    question: str
    dialect: str
    database_id: str
    gold_sql: str


def bundled_examples() -> list[Example]:
    """The example catalog: every dataset case plus a no-ambiguity question."""
    examples = [
        Example(
            example_id=case.id,
            label=f"[{case.source}] {case.question}",
            question=case.question,
            dialect="sqlite",
            database_id=case.database_id,
            gold_sql=case.gold_sql,
        )
        for case in load_dataset(bundled_dataset_path())
    ]
    examples.append(
        Example(
            example_id="fo-count",
            label="[custom] How many drivers are there? (unambiguous)",
            question="How many drivers are there?",
            dialect="sqlite",
            database_id="formula_one",
            gold_sql="SELECT COUNT(*) FROM drivers",
        )
    )
    return examples


def bundled_catalog(cache_dir: str | Path | None = None, sample_k: int = 5):
    """Build the bundled schema catalog.

    Returns (schemas, db_paths): schemas maps database_id -> SchemaModel;
    db_paths maps the ids of file-backed databases to their SQLite files
    (needed for execution comparison).
    """
    cache = Path(cache_dir) if cache_dir else Path(tempfile.mkdtemp(prefix="sqlclarify-"))
    db_path = build_formula_one_db(cache / "formula_one.sqlite")
    schemas: dict[str, SchemaModel] = {}
    model = ingest_database_file(db_path, sample_k=sample_k)
    schemas[model.database_id] = model
    db_paths = {model.database_id: db_path}
    for name in DESCRIPTOR_FILES:
        descriptor = load_descriptor_file(FIXTURES_DIR / name)
        schemas[descriptor.database_id] = descriptor
    return schemas, db_paths

"""Schema ingestion, value sampling, and prompt rendering.

Two schema sources are supported: single-file SQLite databases, which are
introspected and sampled, and JSON descriptors, which are declarative and
can carry column descriptions that a bare database file cannot.
"""

from __future__ import annotations

import sqlite3
from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError, UnknownColumn, ValidationError

TRUNCATION_MARKER = "... [schema truncated]"


@dataclass(frozen=True)
class ColumnInfo:
    name: str
    declared_type: str
    description: str | None = None
    sample_values: tuple[str, ...] = ()


@dataclass(frozen=True)
class TableInfo:
    name: str
    columns: tuple[ColumnInfo, ...]
    row_count: int | None = None

    def column(self, name: str) -> ColumnInfo | None:
        lowered = name.lower()
        for col in self.columns:
            if col.name.lower() == lowered:
                return col
        return None


@dataclass(frozen=True)
class SchemaModel:
    database_id: str
    dialect: str
    tables: tuple[TableInfo, ...]
    source: str  # "file:<path>" or "descriptor:<path-or-inline>"

    def table(self, name: str) -> TableInfo | None:
        lowered = name.lower()
        for tab in self.tables:
            if tab.name.lower() == lowered:
                return tab
        return None


@dataclass(frozen=True)
class SchemaSnippet:
    """A column's identity, description, and a few stored values.

    Shown to users as evidence next to clarification options.
    """

    table: str
    column: str
    description: str | None
    values: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "table": self.table,
            "column": self.column,
            "description": self.description,
            "values": list(self.values),
        }


def render_value(value: object) -> str:
    """Deterministic text rendering for sampled cell values."""
    if isinstance(value, bytes):
        return "0x" + value.hex()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def ingest_database_file(path: str | Path, sample_k: int = 5) -> SchemaModel:
    """Introspect a SQLite database file into a SchemaModel.

    Per column, up to ``sample_k`` distinct non-null values are sampled
    deterministically, in ascending order of their text rendering.

    Raises:
        OSError: if the file does not exist or cannot be read.
        FormatError: if the file is not a SQLite database.
    """
    if sample_k < 1:
        raise ValueError("sample_k must be positive")
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such database file: {p}")
    con = sqlite3.connect(f"file:{p}?mode=ro", uri=True)
    try:
        try:
            names = [
                row[0]
                for row in con.execute(
                    "SELECT name FROM sqlite_master"
                    " WHERE type = 'table' AND name NOT LIKE 'sqlite_%'"
                )
            ]
        except sqlite3.DatabaseError as exc:
            raise FormatError(f"not a SQLite database: {p} ({exc})") from exc
        tables = []
        for name in names:
            quoted = name.replace('"', '""')
            cols_meta = con.execute(f'PRAGMA table_info("{quoted}")').fetchall()
            row_count = con.execute(f'SELECT COUNT(*) FROM "{quoted}"').fetchone()[0]
            columns = []
            for _cid, cname, ctype, _notnull, _default, _pk in cols_meta:
                cquoted = cname.replace('"', '""')
                raw = con.execute(
                    f'SELECT DISTINCT "{cquoted}" FROM "{quoted}"'
                    f' WHERE "{cquoted}" IS NOT NULL'
                ).fetchall()
                rendered = sorted({render_value(v) for (v,) in raw})
                columns.append(
                    ColumnInfo(
                        name=cname,
                        declared_type=ctype or "",
                        description=None,
                        sample_values=tuple(rendered[:sample_k]),
                    )
                )
            tables.append(TableInfo(name=name, columns=tuple(columns), row_count=row_count))
    finally:
        con.close()
    return SchemaModel(
        database_id=p.stem,
        dialect="sqlite",
        tables=tuple(tables),
        source=f"file:{p}",
    )


def _expect(condition: bool, message: str, path: str) -> None:
    if not condition:
        raise ValidationError(message, path)


def ingest_descriptor(doc: dict, source: str = "<inline>") -> SchemaModel:
    """Build a SchemaModel from a JSON descriptor document.

    Raises:
        ValidationError: with a field path like ``tables[1].columns[0].name``.
    """
    _expect(isinstance(doc, dict), "descriptor must be an object", "")
    database_id = doc.get("database_id")
    _expect(isinstance(database_id, str) and database_id != "", "non-empty string required", "database_id")
    dialect = doc.get("dialect", "sqlite")
    _expect(isinstance(dialect, str) and dialect != "", "non-empty string required", "dialect")
    raw_tables = doc.get("tables")
    _expect(isinstance(raw_tables, list), "list required", "tables")

    tables = []
    seen_tables: set[str] = set()
    for ti, raw_table in enumerate(raw_tables):
        tpath = f"tables[{ti}]"
        _expect(isinstance(raw_table, dict), "object required", tpath)
        tname = raw_table.get("name")
        _expect(isinstance(tname, str) and tname != "", "non-empty string required", f"{tpath}.name")
        _expect(tname.lower() not in seen_tables, f"duplicate table name {tname!r}", f"{tpath}.name")
        seen_tables.add(tname.lower())
        row_count = raw_table.get("row_count")
        if row_count is not None:
            _expect(
                isinstance(row_count, int) and not isinstance(row_count, bool) and row_count >= 0,
                "non-negative integer required",
                f"{tpath}.row_count",
            )
        raw_columns = raw_table.get("columns")
        _expect(isinstance(raw_columns, list), "list required", f"{tpath}.columns")
        columns = []
        seen_columns: set[str] = set()
        for ci, raw_col in enumerate(raw_columns):
            cpath = f"{tpath}.columns[{ci}]"
            _expect(isinstance(raw_col, dict), "object required", cpath)
            cname = raw_col.get("name")
            _expect(isinstance(cname, str) and cname != "", "non-empty string required", f"{cpath}.name")
            _expect(cname.lower() not in seen_columns, f"duplicate column name {cname!r}", f"{cpath}.name")
            seen_columns.add(cname.lower())
            ctype = raw_col.get("declared_type", "")
            _expect(isinstance(ctype, str), "string required", f"{cpath}.declared_type")
            description = raw_col.get("description")
            if description is not None:
                _expect(isinstance(description, str), "string required", f"{cpath}.description")
            samples = raw_col.get("sample_values", [])
            _expect(
                isinstance(samples, list) and all(isinstance(s, str) for s in samples),
                "list of strings required",
                f"{cpath}.sample_values",
            )
            _expect(len(set(samples)) == len(samples), "duplicate sample values", f"{cpath}.sample_values")
            columns.append(
                ColumnInfo(
                    name=cname,
                    declared_type=ctype,
                    description=description,
                    sample_values=tuple(samples),
                )
            )
        tables.append(TableInfo(name=tname, columns=tuple(columns), row_count=row_count))

    return SchemaModel(
        database_id=database_id,
        dialect=dialect,
        tables=tuple(tables),
        source=f"descriptor:{source}",
    )


def load_descriptor_file(path: str | Path) -> SchemaModel:
    """Read and validate a descriptor JSON file."""
    import json

    p = Path(path)
    with open(p, encoding="utf-8") as fh:
        doc = json.load(fh)
    return ingest_descriptor(doc, source=str(p))


def to_descriptor(model: SchemaModel) -> dict:
    """Serialize a SchemaModel back to descriptor form (for hooks and APIs)."""
    return {
        "database_id": model.database_id,
        "dialect": model.dialect,
        "tables": [
            {
                "name": t.name,
                **({"row_count": t.row_count} if t.row_count is not None else {}),
                "columns": [
                    {
                        "name": c.name,
                        "declared_type": c.declared_type,
                        **({"description": c.description} if c.description is not None else {}),
                        "sample_values": list(c.sample_values),
                    }
                    for c in t.columns
                ],
            }
            for t in model.tables
        ],
    }


def column_snippet(model: SchemaModel, table: str, column: str, k: int = 3) -> SchemaSnippet:
    """Build evidence for one column: description plus up to ``k`` values.

    Raises:
        UnknownColumn: if the table or column does not exist.
    """
    if k < 1:
        raise ValueError("k must be positive")
    tab = model.table(table)
    col = tab.column(column) if tab is not None else None
    if tab is None or col is None:
        raise UnknownColumn(f"{table}.{column} not in schema {model.database_id}")
    return SchemaSnippet(
        table=tab.name,
        column=col.name,
        description=col.description,
        values=col.sample_values[:k],
    )


def render_for_prompt(model: SchemaModel, budget: int = 4000) -> str:
    """Deterministic textual schema rendering, truncated at table boundaries.

    The output never exceeds ``budget`` characters by more than the length
    of the truncation marker line.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    out = f"Database {model.database_id} (dialect: {model.dialect})"
    truncated = False
    for tab in model.tables:
        lines = [f"Table {tab.name}" + (f" [{tab.row_count} rows]" if tab.row_count is not None else "")]
        for col in tab.columns:
            part = f"  - {col.name} {col.declared_type}".rstrip()
            if col.description:
                part += f" -- {col.description}"
            if col.sample_values:
                part += " (e.g. " + ", ".join(col.sample_values[:3]) + ")"
            lines.append(part)
        block = "\n".join(lines)
        if len(out) + 1 + len(block) > budget:
            truncated = True
            break
        out += "\n" + block
    if truncated:
        out += "\n" + TRUNCATION_MARKER
    return out

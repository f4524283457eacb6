from __future__ import annotations

import json

import pytest

from sqlclarify import fixtures
from sqlclarify.llm_gateway import BackendConfig, Gateway


@pytest.fixture
def formula_one_db(tmp_path):
    """The bundled motorsport fixture, materialized as a SQLite file."""
    return fixtures.build_formula_one_db(tmp_path / "formula_one.sqlite")


@pytest.fixture
def catalog(tmp_path):
    """(schemas, db_paths) for the bundled fixture databases."""
    return fixtures.bundled_catalog(tmp_path / "dbs")


@pytest.fixture
def gateway_factory(tmp_path):
    """Build a scripted Gateway from an in-test entry list."""

    counter = {"n": 0}

    def make(entries: list[dict]) -> Gateway:
        counter["n"] += 1
        path = tmp_path / f"script-{counter['n']}.json"
        path.write_text(json.dumps(entries), encoding="utf-8")
        return Gateway(BackendConfig(mode="scripted", script_path=str(path)))

    return make


@pytest.fixture
def bundled_gateway():
    """Gateway over the bundled fixture script."""
    return Gateway(
        BackendConfig(mode="scripted", script_path=str(fixtures.bundled_script_path()))
    )

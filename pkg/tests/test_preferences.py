
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqlclarify.errors import ValidationError
from sqlclarify.preferences import (
    PreferenceEntry,
    PreferenceTree,
    derive_target_key,
    load,
    lookup,
    merge,
    record,
    snapshot,
)
from sqlclarify.taxonomy import AmbiguityCategory

USR = AmbiguityCategory.UNCLEAR_SCHEMA_REFERENCE


def _entry(target="column:ranked 2", resolution="Use the position column.", qid="q0"):
    return PreferenceEntry(target_key=target, resolution=resolution, source_question_id=qid)


def test_record_into_empty_tree():
    tree = PreferenceTree.empty()
    record(tree, USR, _entry())
    live = lookup(tree, USR)
    assert len(live) == 1
    assert live[0].version == 1
    assert not live[0].superseded


def test_position_then_rank_conflict_merges_to_rank():
    tree = PreferenceTree.empty()
    record(tree, USR, _entry(resolution="Use the position column."))
    record(tree, USR, _entry(resolution="Use the rank column.", qid="q1"))
    live = lookup(tree, USR)
    assert len(live) == 1
    assert live[0].resolution == "Use the rank column."
    assert live[0].version == 2
    assert live[0].source_question_id == "q1"
    # superseded history retained
    assert len(tree.leaves[USR]) == 2
    assert tree.leaves[USR][0].superseded


def test_distinct_targets_live_side_by_side():
    tree = PreferenceTree.empty()
    record(tree, USR, _entry(target="column:ranked 2"))
    record(tree, USR, _entry(target="column:oldest user"))
    assert len(lookup(tree, USR)) == 2


def test_merge_uses_scripted_gateway(gateway_factory):
    gw = gateway_factory(
        [{"stage": "merge", "match_substring": "rank", "response": "Use the rank column of results."}]
    )
    merged = merge(
        _entry(resolution="Use the position column."),
        _entry(resolution="Use the rank column.", qid="q9"),
        gw,
    )
    assert merged.resolution == "Use the rank column of results."
    assert merged.source_question_id == "q9"


def test_merge_falls_back_to_incoming_when_gateway_fails(gateway_factory):
    gw = gateway_factory([])  # no merge entry -> NoScriptMatch -> fallback
    incoming = _entry(resolution="Use the rank column.", qid="q9")
    merged = merge(_entry(), incoming, gw)
    assert merged == incoming


def test_merge_requires_same_target():
    with pytest.raises(ValidationError):
        merge(_entry(target="a"), _entry(target="b"))


def test_identical_re_record_bumps_version_only():
    tree = PreferenceTree.empty()
    record(tree, USR, _entry())
    record(tree, USR, _entry())
    live = lookup(tree, USR)
    assert len(live) == 1
    assert live[0].version == 2
    assert live[0].resolution == "Use the position column."


def test_snapshot_round_trip_and_missing_key():
    tree = PreferenceTree.empty()
    record(tree, USR, _entry())
    record(tree, USR, _entry(resolution="Use the rank column."))
    record(tree, AmbiguityCategory.AMBIGUOUS_TEMPORAL_SPATIAL_SCOPE, _entry(target="temporal:end of the war"))
    doc = snapshot(tree)
    assert set(doc) == {c.value for c in AmbiguityCategory}
    assert load(doc).leaves == tree.leaves
    doc.pop("conflicting_knowledge")
    with pytest.raises(ValidationError):
        load(doc)


def test_snapshot_of_empty_tree_has_all_seven_keys():
    doc = snapshot(PreferenceTree.empty())
    assert set(doc) == {c.value for c in AmbiguityCategory}
    assert all(v == [] for v in doc.values())


def test_derive_target_key_kinds():
    assert derive_target_key(USR, "Ranked 2 ") == "column:ranked 2"
    assert (
        derive_target_key(AmbiguityCategory.AMBIGUOUS_TEMPORAL_SPATIAL_SCOPE, "end of the Vietnam War")
        == "temporal:end of the vietnam war"
    )
    assert derive_target_key(AmbiguityCategory.UNCLEAR_VALUE_REFERENCE, "NYC") == "value:nyc"
    assert derive_target_key(AmbiguityCategory.MISSING_SQL_KEYWORDS, "by date") == "keyword:by date"
    assert derive_target_key(AmbiguityCategory.CONFLICTING_KNOWLEDGE, "x") == "knowledge:x"


@st.composite
def record_sequences(draw):
    n = draw(st.integers(min_value=1, max_value=12))
    ops = []
    for i in range(n):
        category = draw(st.sampled_from(list(AmbiguityCategory)))
        target = draw(st.sampled_from(["t:a", "t:b", "t:c"]))
        ops.append((category, target, f"resolution {i}"))
    return ops


@given(record_sequences())
@settings(max_examples=200, deadline=None)
def test_tree_invariants_hold_for_any_sequence(ops):
    tree = PreferenceTree.empty()
    last_resolution: dict[tuple, str] = {}
    for category, target, resolution in ops:
        record(tree, category, PreferenceEntry(target_key=target, resolution=resolution))
        last_resolution[(category, target)] = resolution
    seen_live = set()
    for category in AmbiguityCategory:
        per_target: dict[str, list[int]] = {}
        for e in tree.leaves[category]:
            per_target.setdefault(e.target_key, []).append(e.version)
        live = lookup(tree, category)
        for e in live:
            # single-live-entry + latest-wins (deterministic fallback)
            assert (category, e.target_key) not in seen_live
            seen_live.add((category, e.target_key))
            assert e.resolution == last_resolution[(category, e.target_key)]
        for versions in per_target.values():
            assert sorted(versions) == list(range(1, len(versions) + 1))
    # category partition: all live entries accounted for exactly once
    total_live = sum(len(lookup(tree, c)) for c in AmbiguityCategory)
    assert total_live == len(seen_live)
    assert load(snapshot(tree)).leaves == tree.leaves

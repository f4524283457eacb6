import json
import random

import httpx
import pytest

from sqlclarify.engine import (
    ClarificationOption,
    ClarificationQuestion,
    DetectedAmbiguity,
    DisambiguationEngine,
)
from sqlclarify.errors import HookError, NoConfidentAnswer, ValidationError
from sqlclarify.evaluation import (
    Annotation,
    Counts,
    EvalCase,
    GatewayHook,
    HttpHook,
    ScriptedHook,
    aggregate,
    f1_score,
    load_dataset,
    oracle_answer,
    percent,
    run_end_to_end,
    score_detection,
)
from sqlclarify.fixtures import bundled_dataset_path, bundled_script_path
from sqlclarify.taxonomy import AmbiguityCategory

CATS = list(AmbiguityCategory)


def _det(span, category, phrase=None, n=0):
    phrase = phrase if phrase is not None else "x" * (span[1] - span[0])
    return DetectedAmbiguity(
        id=f"d{n}", phrase=phrase, span=span, category=category, rationale=""
    )


def _ann(span, category, phrase=None, resolution="gold"):
    phrase = phrase if phrase is not None else "x" * (span[1] - span[0])
    return Annotation(phrase=phrase, span=span, category=category, gold_resolution=resolution)


# -- dataset loading -----------------------------------------------------------


def test_bundled_dataset_loads_and_covers_all_categories():
    cases = load_dataset(bundled_dataset_path())
    assert len(cases) == 8
    covered = {a.category for c in cases for a in c.annotations}
    assert covered == set(AmbiguityCategory)
    multi = [c for c in cases if len(c.annotations) > 1]
    assert len(multi) == 1


def test_dataset_rejects_bad_span(tmp_path):
    bad = {
        "id": "x1",
        "source": "custom",
        "database_id": "db",
        "question": "How many?",
        "gold_sql": "SELECT 1",
        "annotations": [
            {"phrase": "many", "span": [0, 4], "category": "unclear_value_reference", "gold_resolution": "g"}
        ],
    }
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(bad))
    with pytest.raises(ValidationError) as excinfo:
        load_dataset(path)
    assert "x1" in str(excinfo.value)


def test_dataset_rejects_duplicate_ids(tmp_path):
    case = {
        "id": "dup",
        "source": "BIRD",
        "database_id": "db",
        "question": "q?",
        "gold_sql": "SELECT 1",
        "annotations": [],
    }
    path = tmp_path / "dup.jsonl"
    path.write_text(json.dumps(case) + "\n" + json.dumps(case))
    with pytest.raises(ValidationError):
        load_dataset(path)


def test_dataset_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_dataset(path) == []


# -- detection scoring ----------------------------------------------------------


def test_score_identity():
    pairs = [((0, 5), CATS[0]), ((10, 15), CATS[3])]
    detected = [_det(s, c) for s, c in pairs]
    annotated = [_ann(s, c) for s, c in pairs]
    counts = score_detection(detected, annotated)
    assert sum(c.tp for c in counts.values()) == 2
    assert sum(c.fp for c in counts.values()) == 0
    assert sum(c.fn for c in counts.values()) == 0


def test_score_spurious_and_missed():
    detected = [_det((0, 5), CATS[0]), _det((10, 15), CATS[1]), _det((30, 34), CATS[2])]
    annotated = [_ann((0, 5), CATS[0]), _ann((10, 15), CATS[1]), _ann((20, 25), CATS[4])]
    counts = score_detection(detected, annotated)
    assert sum(c.tp for c in counts.values()) == 2
    assert sum(c.fp for c in counts.values()) == 1
    assert sum(c.fn for c in counts.values()) == 1


def test_score_category_mismatch_on_overlap():
    detected = [_det((0, 5), CATS[0])]
    annotated = [_ann((0, 5), CATS[1])]
    counts = score_detection(detected, annotated)
    assert counts[CATS[0]].fp == 1
    assert counts[CATS[1]].fn == 1
    assert all(c.tp == 0 for c in counts.values())


def brute_force_counts(detected, annotated):
    """Oracle: exhaustive search for the maximum number of matched pairs."""
    counts = {}
    categories = {d.category for d in detected} | {a.category for a in annotated}
    for category in categories:
        det = [d for d in detected if d.category is category]
        ann = [a for a in annotated if a.category is category]
        valid = {
            (i, j)
            for i, d in enumerate(det)
            for j, a in enumerate(ann)
            if min(d.span[1], a.span[1]) - max(d.span[0], a.span[0]) > 0
        }
        best = 0

        def search(i, used):
            nonlocal best
            if i == len(det):
                best = max(best, len(used))
                return
            search(i + 1, used)
            for j in range(len(ann)):
                if (i, j) in valid and j not in used:
                    search(i + 1, used | {j})

        search(0, frozenset())
        counts[category] = Counts(tp=best, fp=len(det) - best, fn=len(ann) - best)
    return counts


def _random_instance(rng):
    def spans(k):
        out = []
        for _ in range(k):
            start = rng.randrange(0, 20)
            out.append((start, start + rng.randrange(1, 8)))
        return out

    cats = [rng.choice(CATS[:2]) for _ in range(8)]
    detected = [_det(s, cats[i], n=i) for i, s in enumerate(spans(rng.randrange(0, 5)))]
    annotated = [_ann(s, cats[4 + i]) for i, s in enumerate(spans(rng.randrange(0, 5)))]
    return detected, annotated


def _counts_equal(a, b):
    keys = set(a) | set(b)
    zero = Counts()
    return all(
        (a.get(k, zero).tp, a.get(k, zero).fp, a.get(k, zero).fn)
        == (b.get(k, zero).tp, b.get(k, zero).fp, b.get(k, zero).fn)
        for k in keys
    )


def test_score_matches_brute_force_on_random_instances():
    rng = random.Random(1702)
    for _ in range(250):
        detected, annotated = _random_instance(rng)
        assert _counts_equal(
            score_detection(detected, annotated), brute_force_counts(detected, annotated)
        )
        # count conservation
        counts = score_detection(detected, annotated)
        assert sum(c.tp + c.fp for c in counts.values()) == len(detected)
        assert sum(c.tp + c.fn for c in counts.values()) == len(annotated)


# -- aggregation ------------------------------------------------------------------


def test_aggregate_analytic_example():
    report = aggregate([{CATS[0]: Counts(tp=2, fp=1, fn=1)}])
    row = report.overall
    assert percent(row.precision) == 66.67
    assert percent(row.recall) == 66.67
    assert percent(row.f1) == 66.67


def test_aggregate_pools_micro_counts():
    outcomes = [
        {CATS[0]: Counts(tp=1, fp=1, fn=0), CATS[4]: Counts(tp=1, fp=0, fn=1)},
        {CATS[0]: Counts(tp=2, fp=0, fn=1)},
    ]
    report = aggregate(outcomes)
    db_row = report.per_dimension["db_related"]
    assert (db_row.tp, db_row.fp, db_row.fn) == (3, 1, 1)
    assert (report.overall.tp, report.overall.fp, report.overall.fn) == (4, 1, 2)
    # F1 bounds wherever defined
    for row in list(report.per_category.values()) + [report.overall]:
        assert min(row.precision, row.recall) - 1e-9 <= row.f1 <= max(row.precision, row.recall) + 1e-9


def test_aggregate_zero_denominators_flagged():
    report = aggregate([{CATS[0]: Counts(tp=0, fp=0, fn=0)}])
    row = report.per_category[CATS[0].value]
    assert row.precision == row.recall == row.f1 == 0.0
    assert "precision_undefined" in row.flags
    assert "recall_undefined" in row.flags


def test_f1_reference_rows_within_tolerance():
    # overall row of the reference results: P=87.2, R=89.1 -> F1 ~ 88.2
    assert abs(f1_score(87.2, 89.1) - 88.2) <= 0.15
    # second dimension row: P=93.8, R=83.3 -> F1 ~ 88.2
    assert abs(f1_score(93.8, 83.3) - 88.2) <= 0.15


# -- oracle answers -----------------------------------------------------------------


def _mc_question(*resolutions):
    return ClarificationQuestion(
        id="q0",
        ambiguity_id="a0",
        text="which?",
        options=tuple(
            ClarificationOption(key=chr(ord("A") + i), display=f"opt {i}", resolution=r)
            for i, r in enumerate(resolutions)
        ),
    )


def _case_with_annotation(resolution="use the rank column of results"):
    return EvalCase(
        id="c0",
        source="custom",
        database_id="db",
        question="who is ranked 2?",
        gold_sql="SELECT 1",
        annotations=(
            Annotation(phrase="ranked 2", span=(7, 15), category=CATS[0], gold_resolution=resolution),
        ),
    )


def test_oracle_picks_max_overlap_option():
    question = _mc_question(
        "use the position column of results",
        "use the rank column of results",
        "use the points column of results",
    )
    ambiguity = _det((7, 15), CATS[0], phrase="ranked 2")
    answer = oracle_answer(question, _case_with_annotation(), ambiguity)
    assert answer.selected_key == "B"


def test_oracle_tie_and_zero_overlap_fail_loudly():
    ambiguity = _det((7, 15), CATS[0], phrase="ranked 2")
    with pytest.raises(NoConfidentAnswer):
        oracle_answer(
            _mc_question("use the rank column", "use the rank column"),
            _case_with_annotation(),
            ambiguity,
        )
    with pytest.raises(NoConfidentAnswer):
        oracle_answer(
            _mc_question("alpha beta", "gamma delta"),
            _case_with_annotation(resolution="entirely disjoint words"),
            ambiguity,
        )
    with pytest.raises(NoConfidentAnswer):
        oracle_answer(
            _mc_question("whatever"),
            _case_with_annotation(),
            _det((0, 3), CATS[0], phrase="who"),  # overlaps no annotation
        )


def test_oracle_single_option_with_overlap():
    ambiguity = _det((7, 15), CATS[0], phrase="ranked 2")
    answer = oracle_answer(
        _mc_question("use the rank column of results"), _case_with_annotation(), ambiguity
    )
    assert answer.selected_key == "A"


# -- hooks ---------------------------------------------------------------------------


def test_scripted_hook(catalog):
    hook = ScriptedHook(bundled_script_path())
    schema = catalog[0]["formula_one"]
    sql = hook.generate("How many drivers are there?", schema, "sqlite")
    assert sql == "SELECT COUNT(*) FROM drivers"
    with pytest.raises(HookError):
        hook.generate("question with no entry", schema, "sqlite")


def test_gateway_hook(gateway_factory, catalog):
    gw = gateway_factory(
        [{"stage": "generate", "match_substring": "drivers", "response": "SELECT 1"}]
    )
    hook = GatewayHook(gw)
    assert hook.generate("count drivers", catalog[0]["formula_one"], "sqlite") == "SELECT 1"


def test_http_hook(monkeypatch, catalog):
    seen = {}

    class _Resp:
        status_code = 200

        def raise_for_status(self):
            return None

        def json(self):
            return {"sql": "SELECT 42"}

    def fake_post(url, json=None, timeout=None):
        seen["url"] = url
        seen["payload"] = json
        return _Resp()

    monkeypatch.setattr(httpx, "post", fake_post)
    hook = HttpHook("http://hook.test/sql")
    sql = hook.generate("q?", catalog[0]["california_schools"], "sqlite")
    assert sql == "SELECT 42"
    assert seen["payload"]["database_id"] == "california_schools"
    assert "schema_descriptor" in seen["payload"]


# -- end to end -----------------------------------------------------------------------


def _run(catalog, with_disambiguation):
    from sqlclarify.llm_gateway import BackendConfig, Gateway

    gateway = Gateway(BackendConfig(mode="scripted", script_path=str(bundled_script_path())))
    engine = DisambiguationEngine(gateway)
    hook = ScriptedHook(bundled_script_path())
    report = run_end_to_end(
        load_dataset(bundled_dataset_path()),
        engine,
        catalog[0],
        hook,
        with_disambiguation=with_disambiguation,
    )
    return report, gateway


def test_end_to_end_scripted_accuracies(catalog):
    with_report, gw1 = _run(catalog, True)
    without_report, gw2 = _run(catalog, False)
    assert gw1.http_calls == 0 and gw2.http_calls == 0
    assert without_report.exact_match_accuracy["overall"] == 25.0
    assert with_report.exact_match_accuracy["overall"] == 100.0
    assert with_report.exact_match_accuracy["per_source"]["BIRD"] == 100.0
    assert without_report.exact_match_accuracy["per_source"]["BIRD"] == 50.0
    # detection on the fixture matches the annotations exactly
    assert with_report.overall.tp == 9
    assert with_report.overall.fp == 0 and with_report.overall.fn == 0


def test_end_to_end_deterministic(catalog):
    first, _ = _run(catalog, True)
    second, _ = _run(catalog, True)
    assert first.to_json() == second.to_json()


def test_end_to_end_rejects_empty_dataset(catalog):
    from sqlclarify.llm_gateway import BackendConfig, Gateway

    gateway = Gateway(BackendConfig(mode="scripted", script_path=str(bundled_script_path())))
    with pytest.raises(ValueError):
        run_end_to_end([], DisambiguationEngine(gateway), catalog[0], ScriptedHook(bundled_script_path()), True)


def test_render_text_mentions_sources_and_dimensions(catalog):
    report, _ = _run(catalog, True)
    text = report.render_text()
    assert "Overall" in text
    assert "BIRD samples" in text
    assert "DB-related" in text
    assert "unclear_schema_reference" in text

"""Command-line interface.

Subcommands: detect (one-shot ambiguity listing), interactive (terminal
clarification loop), eval (batch metrics over a JSONL dataset), compare
(SQL exact/execution match), serve (HTTP API + static UI).

Exit codes: 0 success, 1 operational error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import fixtures
from .engine import DisambiguationEngine, UserAnswer
from .errors import ExecError, LexError, SqlClarifyError, ValidationError
from .evaluation import GatewayHook, HttpHook, ScriptedHook, load_dataset, run_end_to_end
from .llm_gateway import BackendConfig, Gateway
from .schema_catalog import ingest_database_file, load_descriptor_file
from .sql_compare import exact_match, execution_match


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqlclarify",
        description="Detect and clarify ambiguities in natural-language database questions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    detect = sub.add_parser("detect", help="detect ambiguities in one question")
    detect.add_argument("question")
    detect.add_argument("--db", required=True, help="database id from the catalog")
    detect.add_argument("--db-dir", help="directory of extra .sqlite/.json schemas")
    detect.add_argument("--json", action="store_true", help="print JSON instead of a table")

    interactive = sub.add_parser("interactive", help="clarify a question in the terminal")
    interactive.add_argument("question")
    interactive.add_argument("--db", required=True)
    interactive.add_argument("--db-dir")

    evaluate = sub.add_parser("eval", help="run batch evaluation on a JSONL dataset")
    evaluate.add_argument("dataset", help="path to a cases .jsonl file")
    evaluate.add_argument("--with-disambiguation", action="store_true")
    evaluate.add_argument(
        "--hook",
        default=None,
        help="SQL generator: an http(s) URL, a script .json path, or 'gateway'",
    )
    evaluate.add_argument("--db-dir")
    evaluate.add_argument("--json", action="store_true")

    compare = sub.add_parser("compare", help="compare two SQL files")
    compare.add_argument("pred", help="predicted SQL file")
    compare.add_argument("gold", help="gold SQL file")
    compare.add_argument("--exec", dest="exec_db", help="SQLite file for execution match")

    serve = sub.add_parser("serve", help="start the HTTP API and static UI")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--db-dir")
    serve.add_argument("--dataset", help="replacement example-catalog dataset (.jsonl)")
    serve.add_argument("--hook-url", help="external text-to-SQL endpoint")
    serve.add_argument("--ui-dir", help="directory of built frontend assets")
    return parser


def _gateway() -> Gateway:
    config = BackendConfig.from_env(default_script=str(fixtures.bundled_script_path()))
    return Gateway(config)


def _catalog(db_dir: str | None):
    schemas, db_paths = fixtures.bundled_catalog()
    if db_dir:
        for path in sorted(Path(db_dir).iterdir()):
            if path.suffix in (".sqlite", ".db", ".sqlite3"):
                model = ingest_database_file(path)
                schemas[model.database_id] = model
                db_paths[model.database_id] = path
            elif path.suffix == ".json":
                model = load_descriptor_file(path)
                schemas[model.database_id] = model
    return schemas, db_paths


def _hook(spec: str | None, gateway: Gateway):
    if spec is None:
        if gateway.config.mode == "scripted":
            return ScriptedHook(gateway.config.script_path)
        return GatewayHook(gateway)
    if spec.startswith(("http://", "https://")):
        return HttpHook(spec)
    if spec == "gateway":
        return GatewayHook(gateway)
    return ScriptedHook(spec)


def _cmd_detect(args) -> int:
    schemas, _ = _catalog(args.db_dir)
    schema = schemas.get(args.db)
    if schema is None:
        print(f"unknown database {args.db!r}; known: {', '.join(sorted(schemas))}", file=sys.stderr)
        return 1
    engine = DisambiguationEngine(_gateway())
    found = engine.detect(args.question, schema)
    if args.json:
        print(
            json.dumps(
                [
                    {
                        "phrase": a.phrase,
                        "span": list(a.span),
                        "category": a.category.value,
                        "rationale": a.rationale,
                        "evidence": [s.to_dict() for s in a.evidence],
                    }
                    for a in found
                ],
                indent=2,
            )
        )
        return 0
    if not found:
        print("no ambiguities detected")
        return 0
    for amb in found:
        print(f"[{amb.category.value}] {amb.phrase!r} at {amb.span}")
        print(f"  {amb.rationale}")
        for snip in amb.evidence:
            print(f"  evidence: {snip.table}.{snip.column} (values: {', '.join(snip.values)})")
    return 0


def _terminal_provider(questions):
    answers = []
    for q in questions:
        print(f"\n{q.text}")
        for opt in q.options:
            print(f"  {opt.key}) {opt.display}")
            if opt.snippet:
                print(f"      {opt.snippet.table}.{opt.snippet.column}: {', '.join(opt.snippet.values)}")
        keys = {o.key for o in q.options}
        while True:
            choice = input("choice> ").strip().upper()
            if choice in keys:
                break
            print(f"  pick one of {', '.join(sorted(keys))}")
        answers.append(UserAnswer(question_id=q.id, selected_key=choice))
    extra = input("\nadditional constraint (empty for none)> ").strip()
    return answers, [extra] if extra else []


def _cmd_interactive(args) -> int:
    schemas, _ = _catalog(args.db_dir)
    schema = schemas.get(args.db)
    if schema is None:
        print(f"unknown database {args.db!r}", file=sys.stderr)
        return 1
    engine = DisambiguationEngine(_gateway())
    session = engine.new_session("interactive", args.question, schema)
    session = engine.resolve_loop(session, _terminal_provider)
    print(f"\nstate: {session.state.value}")
    print(f"rewritten question: {session.rewritten_question}")
    return 0 if session.state.value == "resolved" else 1


def _cmd_eval(args) -> int:
    try:
        dataset = load_dataset(args.dataset)
    except (OSError, ValidationError) as exc:
        print(f"cannot load dataset: {exc}", file=sys.stderr)
        return 1
    if not dataset:
        print("dataset is empty", file=sys.stderr)
        return 1
    gateway = _gateway()
    schemas, _ = _catalog(args.db_dir)
    engine = DisambiguationEngine(gateway)
    hook = _hook(args.hook, gateway)
    report = run_end_to_end(
        dataset, engine, schemas, hook, with_disambiguation=args.with_disambiguation
    )
    print(report.to_json() if args.json else report.render_text())
    return 0


def _cmd_compare(args) -> int:
    try:
        pred = Path(args.pred).read_text(encoding="utf-8")
        gold = Path(args.gold).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"cannot read input: {exc}", file=sys.stderr)
        return 1
    try:
        report = exact_match(pred, gold)
    except LexError as exc:
        print(f"cannot tokenize: {exc}", file=sys.stderr)
        return 1
    result = report.to_dict()
    if args.exec_db:
        try:
            result["execution"] = execution_match(pred, gold, args.exec_db)
        except ExecError as exc:
            print(f"execution comparison failed: {exc}", file=sys.stderr)
            return 1
    print(json.dumps(result, indent=2))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    gateway = _gateway()
    schemas, db_paths = _catalog(args.db_dir)
    examples = fixtures.bundled_examples()
    if args.dataset:
        examples = [
            fixtures.Example(
                example_id=c.id,
                label=f"[{c.source}] {c.question}",
                question=c.question,
                dialect="sqlite",
                database_id=c.database_id,
                gold_sql=c.gold_sql,
            )
            for c in load_dataset(args.dataset)
        ]
    app = create_app(
        engine=DisambiguationEngine(gateway),
        schemas=schemas,
        db_paths=db_paths,
        examples=examples,
        hook=_hook(args.hook_url, gateway),
        ui_dir=args.ui_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "detect": _cmd_detect,
        "interactive": _cmd_interactive,
        "eval": _cmd_eval,
        "compare": _cmd_compare,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except SqlClarifyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

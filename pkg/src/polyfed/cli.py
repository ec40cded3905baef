"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime failure.  State persists
between invocations through the data_dir snapshot: commands restore it
when present and mutating commands write it back.
"""

import argparse
import json
import os
import sys

from .config import load_config
from .data import dump_json, parse_source
from .demo import DEMO_TODAY, seed_demo
from .errors import PolyfedError
from .repl import format_table, run_repl
from .schema import build_er_graph, emit_ddl, generate_hints, infer_table_schema
from .service import PolyfedService


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def build_parser() -> _Parser:
    parser = _Parser(prog="polyfed",
                     description="self-optimizing multi-model database engine")
    parser.add_argument("--config", help="config file (or POLYFED_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--demo", action="store_true", help="seed the demo dataset")
    serve.add_argument("--ui-dir", default=None, help="static console assets")

    ingest = sub.add_parser("ingest", help="classify and store a file")
    ingest.add_argument("file")
    ingest.add_argument("--format", choices=["csv", "json", "yaml"], default=None)
    ingest.add_argument("--header", action="store_true", help="CSV first row is a header")
    ingest.add_argument("--mode", choices=["baseline", "extended"], default=None)
    ingest.add_argument("--segment", default=None)
    ingest.add_argument("--as-table", action="store_true",
                        help="force relational ingest with schema inference")

    query = sub.add_parser("query", help="run one natural-language question")
    query.add_argument("question")
    query.add_argument("--session", default="cli")
    query.add_argument("--mode", choices=["paper", "strict"], default=None)

    schema = sub.add_parser("schema", help="schema tools")
    schema_sub = schema.add_subparsers(dest="schema_command", required=True)
    infer = schema_sub.add_parser("infer", help="infer a table schema from a file")
    infer.add_argument("file")
    infer.add_argument("--name", required=True, help="table name for the schema")
    infer.add_argument("--format", choices=["csv", "json", "yaml"], default=None)
    infer.add_argument("--header", action="store_true")
    output = infer.add_mutually_exclusive_group()
    output.add_argument("--ddl", action="store_true")
    output.add_argument("--er", action="store_true")
    output.add_argument("--hints", action="store_true")

    tune = sub.add_parser("tune", help="run tuning episodes")
    tune.add_argument("--episodes", type=int, default=10)
    tune.add_argument("--steps", type=int, default=20)
    tune.add_argument("--seed", type=int, default=None)

    snapshot = sub.add_parser("snapshot", help="write a snapshot")
    snapshot.add_argument("--dir", default=None)

    restore = sub.add_parser("restore", help="load a snapshot")
    restore.add_argument("--dir", default=None)

    repl = sub.add_parser("repl", help="interactive console")
    repl.add_argument("--demo", action="store_true")
    return parser


def _guess_format(path: str, given: str | None) -> str:
    if given:
        return given
    ext = os.path.splitext(path)[1].lower()
    return {".csv": "csv", ".yaml": "yaml", ".yml": "yaml"}.get(ext, "json")


def _open_service(config, restore_state: bool = True) -> PolyfedService:
    service = PolyfedService(config)
    data_dir = config.get("data_dir")
    snap = os.path.join(data_dir, "snapshot") if data_dir else None
    if restore_state and snap and os.path.isdir(snap):
        service.restore(snap)
    return service


def _save_state(service) -> None:
    if service.config.get("data_dir"):
        service.snapshot()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1

    try:
        config = load_config(args.config)
        return _run(args, config)
    except PolyfedError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _run(args, config) -> int:
    if args.command == "serve":
        from .server import serve as run_server
        service = _open_service(config)
        if args.demo:
            service.clock = lambda: DEMO_TODAY
            service.grammar.clock = service.clock
            seed_demo(service)
        port = args.port if args.port is not None else config.get_int("server.port")
        ui_dir = args.ui_dir or _default_ui_dir()
        interval = config.get_float("tuner.background_interval_s")
        if interval > 0:
            service.start_background_tuner(interval)
        run_server(service, port=port, ui_dir=ui_dir)
        return 0

    if args.command == "ingest":
        with open(args.file, "rb") as handle:
            data = handle.read()
        service = _open_service(config)
        ack = service.ingest_source(
            data, _guess_format(args.file, args.format),
            csv_header=args.header, mode=args.mode, segment=args.segment,
            as_table=args.as_table)
        _save_state(service)
        print(dump_json(ack, pretty=True))
        return 0

    if args.command == "query":
        service = _open_service(config)
        response = service.answer_question(args.session, args.question, args.mode)
        print(f"[{response['dialect']}] {response['query']}")
        print(format_table(response["columns"], response["rows"]))
        print(response["summary"])
        return 0

    if args.command == "schema":
        return _run_schema(args)

    if args.command == "tune":
        service = _open_service(config)
        summary = service.tune(args.episodes, args.steps, seed=args.seed)
        _save_state(service)
        print(dump_json({k: v for k, v in summary.items() if k != "status"}, pretty=True))
        return 0

    if args.command == "snapshot":
        service = _open_service(config)
        ack = service.snapshot(args.dir)
        print(f"snapshot written to {ack['directory']}")
        return 0

    if args.command == "restore":
        service = _open_service(config, restore_state=False)
        ack = service.restore(args.dir)
        _save_state(service)
        print(f"restored {len(ack['tables'])} table(s) from {ack['directory']}")
        return 0

    if args.command == "repl":
        service = _open_service(config)
        if args.demo:
            service.clock = lambda: DEMO_TODAY
            service.grammar.clock = service.clock
            seed_demo(service)
        run_repl(service)
        return 0
    return 1


def _run_schema(args) -> int:
    if args.schema_command != "infer":
        return 1
    with open(args.file, "rb") as handle:
        data = handle.read()
    value = parse_source(data, _guess_format(args.file, args.format),
                         csv_header=args.header)
    if isinstance(value, dict):
        samples = [value]
    elif isinstance(value, list) and all(isinstance(v, dict) for v in value):
        samples = value
    else:
        print("error: schema inference needs a mapping or a list of mappings",
              file=sys.stderr)
        return 2
    schema = infer_table_schema(samples, args.name)
    if args.er:
        print(build_er_graph([schema]).to_json())
    elif args.hints:
        hints = generate_hints([schema])
        print(dump_json({
            "index_suggestions": [list(s) for s in hints.index_suggestions],
            "constraint_suggestions": [list(s) for s in hints.constraint_suggestions],
            "partition_suggestions": [list(s) for s in hints.partition_suggestions],
        }, pretty=True))
    else:
        print(emit_ddl(schema))
    return 0


def _default_ui_dir():
    here = os.path.dirname(os.path.abspath(__file__))
    candidate = os.path.normpath(os.path.join(here, "..", "..", "frontend", "dist"))
    return candidate if os.path.isdir(candidate) else None


if __name__ == "__main__":
    sys.exit(main())

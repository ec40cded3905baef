"""Interactive console over the in-process service.

Plain text runs as a natural-language query in one persistent session;
backslash commands cover plans, schema, tuning, and snapshots.
"""

import json
from decimal import Decimal

from .engines import EngineResult, jsonable
from .errors import PolyfedError
from .nl import _format_value

HELP = """commands:
  <question>        run a natural-language query
  \\plan <json>      execute a raw plan (a bare {type,query} node is wrapped)
  \\schema           show catalog DDL and relationships
  \\tune N           run N tuning episodes
  \\snapshot         write a snapshot to the data directory
  \\help             this text
  \\quit             leave
"""


def format_table(columns, rows) -> str:
    if not rows:
        return "(no rows)"
    rendered = [[_format_value(row.get(c)) for c in columns] for row in rows]
    widths = [max(len(str(c)), *(len(r[i]) for r in rendered))
              for i, c in enumerate(columns)]
    header = " | ".join(str(c).ljust(w) for c, w in zip(columns, widths))
    rule = "-+-".join("-" * w for w in widths)
    body = "\n".join(" | ".join(cell.ljust(w) for cell, w in zip(row, widths))
                     for row in rendered)
    return f"{header}\n{rule}\n{body}"


def _print_result(result: EngineResult, out) -> None:
    out(format_table(result.columns,
                     [jsonable({c: r.get(c) for c in result.columns})
                      for r in result.rows]))


def run_repl(service, input_fn=input, out=print, session_id: str = "repl") -> None:
    out("polyfed console; \\help for commands")
    while True:
        try:
            line = input_fn("polyfed> ")
        except EOFError:
            break
        line = line.strip()
        if not line:
            continue
        if line.startswith("\\"):
            if not _command(service, line, out, session_id):
                break
            continue
        try:
            response = service.answer_question(session_id, line)
        except PolyfedError as exc:
            out(f"error [{exc.code}]: {exc.message}")
            continue
        out(f"[{response['dialect']}] {response['query']}")
        verdict = "ok" if response["validation"]["ok"] else "failed"
        out(f"validation: {verdict} (attempts: {response['attempts']})")
        out(format_table(response["columns"], response["rows"]))
        out(response["summary"])


def _command(service, line: str, out, session_id: str) -> bool:
    """Returns False only for \\quit."""
    command, _, argument = line.partition(" ")
    try:
        if command == "\\quit":
            return False
        if command == "\\help":
            out(HELP)
        elif command == "\\schema":
            payload = service.schema_payload()
            for name, ddl in payload["tables"].items():
                out(ddl)
            for rel in payload["er"]["relationships"]:
                out(f"{rel['from']} -> {rel['to']} via {rel['via']} ({rel['cardinality']})")
            if not payload["tables"]:
                out("(no tables)")
        elif command == "\\tune":
            episodes = int(argument or "1")
            summary = service.tune(episodes=episodes, steps=20)
            out(f"tuned: cost={summary['final_cost']} "
                f"epsilon={summary['epsilon']:.4f} "
                f"reward={summary['total_reward']:.4f}")
        elif command == "\\snapshot":
            ack = service.snapshot()
            out(f"snapshot written to {ack['directory']}")
        elif command == "\\plan":
            raw = json.loads(argument, parse_float=Decimal)
            if isinstance(raw, dict) and set(raw) == {"type", "query"}:
                raw = {"nodes": [raw], "merge": []}
            result = service.run_plan(raw)
            _print_result(result, out)
        else:
            out(f"unknown command {command}; \\help lists commands")
    except PolyfedError as exc:
        out(f"error [{exc.code}]: {exc.message}")
    except (ValueError, json.JSONDecodeError) as exc:
        out(f"error [BAD_INPUT]: {exc}")
    return True

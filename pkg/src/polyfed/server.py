"""HTTP/JSON surface over the service facade.

Every error maps to a documented code; the handler never lets an
exception escape as a raw traceback.
"""

import json
import mimetypes
import os
import threading
import uuid
from decimal import Decimal
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .data import dump_json
from .engines import jsonable
from .errors import (ChecksumMismatch, EmptyCatalog, EmptySample, EncodingError,
                     FilterSyntaxError, IncompatibleFormatVersion, InvalidAction,
                     MalformedSource, NoEngineRegistered, NotFound, NotTranslatable,
                     PatternSyntaxError, PayloadShapeError, PlanError, PlanFormatError,
                     PlanTimeout, PolyfedError, RefinementExhausted, SchemaMismatch,
                     SessionBusy, SqlSyntaxError, TranslatorTimeout,
                     TranslatorUnavailable, TypeMismatch, UnjoinableFragments,
                     UnknownCollection, UnknownColumn, UnknownSession,
                     UnknownSubqueryType, UnknownTable, UnrecognizedIntent)
from .service import PolyfedService

STATUS_OF = {
    MalformedSource: 400, EncodingError: 400, PlanFormatError: 400,
    UnknownSubqueryType: 400, SqlSyntaxError: 400, FilterSyntaxError: 400,
    PatternSyntaxError: 400,
    UnknownSession: 404, NotFound: 404, UnknownTable: 404, UnknownCollection: 404,
    NoEngineRegistered: 404, UnknownColumn: 404,
    SessionBusy: 409,
    UnrecognizedIntent: 422, NotTranslatable: 422, RefinementExhausted: 422,
    SchemaMismatch: 422, PayloadShapeError: 422, TypeMismatch: 422, EmptySample: 422,
    EmptyCatalog: 422, PlanError: 422, UnjoinableFragments: 422, InvalidAction: 422,
    ChecksumMismatch: 422, IncompatibleFormatVersion: 422,
    TranslatorUnavailable: 502,
    PlanTimeout: 504, TranslatorTimeout: 504,
}


def status_for(error: PolyfedError) -> int:
    for cls in type(error).__mro__:
        if cls in STATUS_OF:
            return STATUS_OF[cls]
    return 422


def error_payload(error: PolyfedError) -> dict:
    payload = {"code": error.code, "message": error.message}
    if isinstance(error, RefinementExhausted):
        payload["detail"] = error.report.to_dict()
    elif isinstance(error, PlanError):
        inner = error.cause
        payload["detail"] = {"node_index": error.node_index,
                             "cause": getattr(inner, "code", "INTERNAL"),
                             "message": str(inner)}
    elif error.detail:
        payload["detail"] = {k: jsonable(v) for k, v in error.detail.items()}
    return {"error": payload}


class _Handler(BaseHTTPRequestHandler):
    service: PolyfedService = None
    ui_dir: str | None = None

    protocol_version = "HTTP/1.1"

    def log_message(self, format, *args):   # quiet by default
        pass

    # -- plumbing -------------------------------------------------------------

    def _send_json(self, status: int, payload) -> None:
        body = dump_json(payload, pretty=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self):
        raw = self._body
        if not raw:
            raise MalformedSource(0, 0, "empty request body")
        try:
            return json.loads(raw.decode("utf-8"), parse_float=Decimal)
        except UnicodeDecodeError as exc:
            raise EncodingError(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise MalformedSource(exc.lineno, exc.colno, exc.msg) from exc

    def _dispatch(self, method: str) -> None:
        # Drain the body up front: keep-alive connections would otherwise
        # feed unread bytes into the next request line.
        length = int(self.headers.get("Content-Length") or 0)
        self._body = self.rfile.read(length) if length else b""
        try:
            handler = self._route(method)
            if handler is None:
                known = self.path.split("?")[0] in ("/health", "/schema", "/tuner/status",
                                                    "/query", "/ingest", "/plan", "/session")
                if known:
                    self._send_json(405, {"error": {"code": "METHOD_NOT_ALLOWED",
                                                    "message": f"{method} not allowed"}})
                else:
                    self._send_json(404, {"error": {"code": "NOT_FOUND",
                                                    "message": f"no route {self.path}"}})
                return
            handler()
        except PolyfedError as exc:
            self._send_json(status_for(exc), error_payload(exc))
        except BrokenPipeError:
            pass
        except Exception as exc:   # reserved; fuzzing must never reach this
            self._send_json(500, {"error": {"code": "INTERNAL", "message": str(exc)}})

    def _route(self, method: str):
        path = self.path.split("?")[0]
        if method == "GET":
            return {"/health": self._health, "/schema": self._schema,
                    "/tuner/status": self._tuner_status}.get(path) \
                or (self._static if path == "/ui" or path.startswith("/ui/") else None)
        if method == "POST":
            return {"/query": self._query, "/ingest": self._ingest,
                    "/plan": self._plan, "/session": self._session}.get(path)
        return None

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    # -- endpoints ---------------------------------------------------------------

    def _health(self):
        self._send_json(200, {"status": "ok", "version": self.service.version})

    def _session(self):
        session_id = f"s-{uuid.uuid4().hex[:12]}"
        self.service.sessions.create(session_id)
        self._send_json(200, {"session_id": session_id})

    def _query(self):
        body = self._read_json()
        if not isinstance(body, dict) or "question" not in body:
            raise MalformedSource(0, 0, "body must be an object with a 'question'")
        question = body["question"]
        if not isinstance(question, str) or not question.strip():
            raise UnrecognizedIntent("question must be non-empty text")
        session_id = body.get("session_id") or f"s-{uuid.uuid4().hex[:12]}"
        if not isinstance(session_id, str):
            raise MalformedSource(0, 0, "session_id must be text")
        mode = body.get("mode")
        if mode not in (None, "paper", "strict"):
            raise MalformedSource(0, 0, "mode must be 'paper' or 'strict'")
        response = self.service.answer_question(session_id, question, mode)
        response["session_id"] = session_id
        self._send_json(200, response)

    def _ingest(self):
        body = self._read_json()
        if not isinstance(body, dict) or "payload" not in body or "format" not in body:
            raise MalformedSource(0, 0, "body must carry 'format' and 'payload'")
        format = body["format"]
        if format not in ("csv", "json", "yaml"):
            raise MalformedSource(0, 0, "format must be csv, json, or yaml")
        payload = body["payload"]
        if not isinstance(payload, str):
            payload = dump_json(payload, pretty=False)
        response = self.service.ingest_source(
            payload.encode("utf-8"), format,
            csv_header=bool(body.get("header")),
            mode=body.get("mode"),
            segment=body.get("segment"),
            as_table=bool(body.get("as_table")))
        self._send_json(200, response)

    def _plan(self):
        body = self._read_json()
        result = self.service.run_plan(body)
        self._send_json(200, {
            "columns": list(result.columns),
            "rows": [jsonable({c: row.get(c) for c in result.columns})
                     for row in result.rows],
            "stats": {"rows_scanned": result.stats.rows_scanned,
                      "elapsed_cost": result.stats.elapsed_cost}})

    def _schema(self):
        self._send_json(200, self.service.schema_payload())

    def _tuner_status(self):
        self._send_json(200, self.service.tuner_status())

    def _static(self):
        if not self.ui_dir:
            self._send_json(404, {"error": {"code": "NOT_FOUND",
                                            "message": "console assets not built"}})
            return
        rel = self.path.split("?")[0][len("/ui"):].lstrip("/") or "index.html"
        full = os.path.normpath(os.path.join(self.ui_dir, rel))
        if not full.startswith(os.path.abspath(self.ui_dir)) or not os.path.isfile(full):
            self._send_json(404, {"error": {"code": "NOT_FOUND",
                                            "message": f"no asset {rel}"}})
            return
        with open(full, "rb") as handle:
            body = handle.read()
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def make_server(service: PolyfedService, port: int = 0,
                ui_dir: str | None = None) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,),
                   {"service": service, "ui_dir": ui_dir})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve(service: PolyfedService, port: int, ui_dir: str | None = None) -> None:
    server = make_server(service, port=port, ui_dir=ui_dir)
    host, actual_port = server.server_address
    print(f"polyfed serving on http://{host}:{actual_port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def start_background(service: PolyfedService, port: int = 0,
                     ui_dir: str | None = None):
    """(server, thread) for tests and the console smoke harness."""
    server = make_server(service, port=port, ui_dir=ui_dir)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread

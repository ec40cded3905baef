"""The in-process facade every surface (HTTP, REPL, CLI) drives.

Owns the five engines, the catalog, the session store, the federator,
the tuner, and the query log, and implements the ingest and question
pipelines end to end.
"""

import datetime
import hashlib
import os
import random
import time

from . import nl
from .catalog import Catalog, SegmentRecord
from .config import Config, load_config
from .costmodel import JoinStep, QueryDescriptor, TableAccess
from .data import parse_source
from .engines import EngineRegistry, EngineResult, jsonable
from .engines.document import DocumentEngine
from .engines.graph import GraphEngine
from .engines.kv import KvEngine
from .engines.relational import RelationalEngine, SelectStmt, parse_statement
from .errors import (EmptyCatalog, NotTranslatable, PayloadShapeError,
                     RefinementExhausted, UnrecognizedIntent)
from .federation import Federator, MergeSpec, QueryPlan, SubQuery, decompose
from .ingest import (SegmentStats, StorageParadigm, classify_format, extract_features,
                     refine_assignment, route_to_engine)
from .schema import build_er_graph
from .snapshot import read_snapshot, write_snapshot
from .tuner import QueryLogEntry, Tuner, enumerate_index_candidates
from .engines.vector import VectorEngine


def _digest(dialect: str, text: str) -> str:
    return hashlib.sha256(f"{dialect}:{text}".encode("utf-8")).hexdigest()[:16]


class PolyfedService:
    def __init__(self, config: Config | None = None, clock=None, kv_clock=None):
        self.config = config or load_config()
        self.clock = clock or datetime.date.today
        self.relational = RelationalEngine("rel0")
        self.document = DocumentEngine("doc0")
        self.graph = GraphEngine("graph0")
        self.kv = KvEngine("kv0", clock=kv_clock or time.monotonic)
        self.vector = VectorEngine("vec0")
        self.registry = EngineRegistry(
            [self.relational, self.document, self.graph, self.kv, self.vector],
            mode=self.config.get("mode"))
        self.catalog = Catalog()
        self.version = 0
        self.federator = Federator(
            self.registry,
            plan_timeout_ms=self.config.get_int("server.plan_timeout_ms"),
            version_source=lambda: self.version)
        self.sessions = nl.SessionStore(capacity=self.config.get_int("nl.history_capacity"))
        self.query_log: list[QueryLogEntry] = []
        self.segment_stats: dict[str, SegmentStats] = {}
        self._tuner: Tuner | None = None
        self._restored_q: dict | None = None
        self._segment_counter = 0
        self.grammar = nl.GrammarTranslator(self.catalog, clock=self.clock)

    # -- translator selection -------------------------------------------------

    def translator(self):
        if self.config.llm_configured:
            return nl.LlmTranslator(
                endpoint=self.config.get("llm.endpoint"),
                model=self.config.get("llm.model"),
                api_key=os.environ.get("POLYFED_LLM_KEY", ""),
                timeout_ms=self.config.get_int("llm.timeout_ms"))
        return self.grammar

    # -- ingest pipeline ----------------------------------------------------------

    def ingest_source(self, data: bytes, format: str, csv_header: bool = False,
                      mode: str | None = None, segment: str | None = None,
                      as_table: bool = False) -> dict:
        value = parse_source(data, format, csv_header=csv_header)
        mode = mode or self.config.get("mode")
        if as_table:
            paradigm = StorageParadigm.RELATIONAL
            decision_rationale = ("FORCED_AS_TABLE",)
        else:
            profile = extract_features(value)
            paradigm = classify_format(profile, mode)
            decision_rationale = None
        decision = route_to_engine(paradigm, self.registry)
        if decision_rationale is not None:
            decision = type(decision)(paradigm, decision.engine_id, 1.0,
                                      decision_rationale, mode)
        engine = self.registry.engine_by_id(decision.engine_id)

        if segment is None:
            self._segment_counter += 1
            segment = f"seg{self._segment_counter}"
        target = segment
        with engine.lock.write():
            count = engine.ingest(value, target)
            self.version += 1
        self._register_ingest(engine, decision.paradigm, target, count)
        self.catalog.register_segment(SegmentRecord(
            segment, decision.paradigm, engine.engine_id, target, count))
        self.segment_stats.setdefault(
            segment, SegmentStats(segment, window_size=self.config.get_int("ingest.window")))
        return {"paradigm": decision.paradigm.value, "engine_id": decision.engine_id,
                "count": count, "segment": segment,
                "rationale": list(decision.rationale), "mode": decision.mode}

    def _register_ingest(self, engine, paradigm: StorageParadigm, target: str,
                         count: int) -> None:
        if engine is self.relational:
            table = self.relational.tables.get(target)
            if table is not None:
                self.catalog.register_schema(table.schema)
        elif paradigm is StorageParadigm.UNSTRUCTURED:
            self.catalog.register_collection(target, StorageParadigm.DOCUMENT)
        else:
            self.catalog.register_collection(target, engine.paradigm)

    # -- reassignment ----------------------------------------------------------------

    def record_access(self, segment_id: str, paradigm: StorageParadigm,
                      latency_ms: float) -> None:
        stats = self.segment_stats.setdefault(
            segment_id,
            SegmentStats(segment_id, window_size=self.config.get_int("ingest.window")))
        stats.record_access(paradigm, latency_ms)

    def propose_reassignment(self, segment_id: str):
        record = self.catalog.segments.get(segment_id)
        stats = self.segment_stats.get(segment_id)
        if record is None or stats is None or not stats.window:
            return None
        threshold = self.config.get_float("ingest.reassign_threshold")
        return refine_assignment(stats, record.paradigm, threshold)

    def apply_migration(self, proposal) -> dict:
        """Export -> reingest -> verify record count, then update the catalog."""
        record = self.catalog.segments[proposal.segment_id]
        source = self.registry.engine_by_id(record.engine_id)
        target_engine = self.registry.engine_for(proposal.proposed)
        if target_engine is None:
            raise PayloadShapeError(f"no engine for paradigm {proposal.proposed}")
        with source.lock.read():
            payload = source.export_records(record.target)
            before = source.record_count(record.target)
        with target_engine.lock.write():
            stored = target_engine.ingest(payload, record.target)
            self.version += 1
        if stored != before:
            raise PayloadShapeError(
                f"migration count mismatch: exported {before}, stored {stored}")
        self._register_ingest(target_engine, proposal.proposed, record.target, stored)
        self.catalog.register_segment(SegmentRecord(
            record.segment_id, proposal.proposed, target_engine.engine_id,
            record.target, stored))
        return {"segment": record.segment_id, "from": record.paradigm.value,
                "to": proposal.proposed.value, "records": stored}

    # -- question pipeline ---------------------------------------------------------------

    def _resolve_filter_column(self, value: str, intent) -> str | None:
        """Find the first TEXT column whose values contain the literal."""
        try:
            schema, _ = self.grammar.resolve_entity(intent.slots.get("entity", ""))
        except NotTranslatable:
            return None
        table = self.relational.tables.get(schema.table_name)
        if table is None:
            return None
        for i, spec in enumerate(table.schema.fields):
            if spec.sql_type != "TEXT":
                continue
            if any(row[i] == value for row in table.rows):
                return spec.name
        return None

    def _intent_for(self, session: nl.SessionContext, question: str):
        follow_value = nl.parse_follow_up(question)
        if follow_value is not None:
            previous = session.last_intent()
            if previous is not None:
                column = self._resolve_filter_column(follow_value, previous)
                if column is not None:
                    return nl.merge_follow_up(previous, column, follow_value)
        return nl.parse_intent(question)

    def _expected_tables(self, intent) -> list:
        if intent is None or intent.kind not in ("select", "aggregate_count",
                                                 "topk", "graph_traverse"):
            return []
        tables = []
        if intent.slots.get("action_verb"):
            from .federation import VERB_TABLES
            verb_table = VERB_TABLES.get(intent.slots["action_verb"])
            if verb_table:
                tables.append(verb_table)
        entity = intent.slots.get("entity")
        if entity and (intent.kind != "graph_traverse"
                       or intent.slots.get("action_verb")):
            try:
                schema, _ = self.grammar.resolve_entity(entity)
                tables.append(schema.table_name)
            except NotTranslatable:
                pass
        return tables

    def answer_question(self, session_id: str, question: str,
                        validator_mode: str | None = None) -> dict:
        request = nl.NlRequest(session_id, question)
        session = self.sessions.get_or_create(request.session_id)
        busy = self.sessions.acquire(request.session_id)
        try:
            return self._answer_locked(session, request, validator_mode)
        finally:
            busy.release()

    def _answer_locked(self, session, request, validator_mode) -> dict:
        mode = validator_mode or self.config.get("validator.mode")
        budget = self.config.get_int("nl.budget_chars")
        max_attempts = self.config.get_int("nl.max_attempts")

        translator = self.translator()
        try:
            intent = self._intent_for(session, request.question)
        except UnrecognizedIntent:
            if translator is self.grammar:
                raise NotTranslatable(
                    "no grammar pattern matches and no remote model is configured")
            intent = None

        try:
            context = nl.retrieve_schema_context(intent, self.catalog, budget)
        except EmptyCatalog:
            context = ""
        envelope = nl.compose_envelope(request.question, context,
                                       session.history_digest(), budget)

        expected = self._expected_tables(intent)
        if intent is not None and intent.slots.get("action_verb"):
            plan, query, report, attempts = self._composite_plan(
                intent, expected, mode)
        else:
            query = translator.translate(envelope, intent)
            report = nl.validate_query(query, expected, mode, self.catalog)
            attempts = query.attempt
            while not report.ok:
                query = nl.refine(query, report, envelope, attempts, translator,
                                  intent, self.catalog, max_attempts)
                attempts = query.attempt
                report = nl.validate_query(query, expected, mode, self.catalog)
            plan = QueryPlan(nodes=[SubQuery(query.dialect, query.text)],
                             merge=[MergeSpec("concat")])

        result = self.federator.execute_plan(plan)
        summary = nl.summarize_result(result)
        digest = self._append_log(query.dialect, query.text, result)
        turn = nl.Turn(request.question, intent, query,
                       digest=f"{len(result.rows)} rows [{digest}]")
        self.sessions.update_session(request.session_id, turn)

        return {
            "query": query.text,
            "dialect": query.dialect,
            "validation": report.to_dict(),
            "columns": list(result.columns),
            "rows": [jsonable({c: row.get(c) for c in result.columns})
                     for row in result.rows],
            "summary": summary,
            "attempts": attempts,
        }

    def _composite_plan(self, intent, expected, mode):
        plan = decompose(intent, self.catalog, self.grammar)
        reports = []
        for node in plan.nodes:
            node_query = nl.GeneratedQuery(node.type, node.query)
            reports.append(nl.validate_query(node_query, expected, mode, self.catalog))
        bad = next((r for r in reports if not r.ok), None)
        if bad is not None:
            raise RefinementExhausted(bad)
        from .data import dump_json
        query = nl.GeneratedQuery(plan.nodes[0].type,
                                  dump_json(plan.to_dict(), pretty=False),
                                  source="grammar")
        return plan, query, reports[0], 1

    # -- raw plans -------------------------------------------------------------------------

    def run_plan(self, raw: dict) -> EngineResult:
        plan = decompose(raw, self.catalog, self.grammar)
        result = self.federator.execute_plan(plan)
        first = plan.nodes[0]
        self._append_log(first.type, first.query, result)
        return result

    # -- query log ----------------------------------------------------------------------------

    def _append_log(self, dialect: str, text: str, result: EngineResult) -> str:
        digest = _digest(dialect, text)
        descriptor = None
        tables: tuple = ()
        equality: tuple = ()
        ranges: tuple = ()
        joins: tuple = ()
        if dialect == "sql":
            try:
                stmt = parse_statement(text)
            except Exception:
                stmt = None
            if isinstance(stmt, SelectStmt):
                tables, equality, ranges, joins, descriptor = self._describe_sql(
                    stmt, digest, result)
        entry = QueryLogEntry(
            digest=digest, dialect=dialect, tables=tables,
            equality_columns=equality, range_columns=ranges, join_pairs=joins,
            latency_ms=result.stats.wall_ms,
            cost_units=result.stats.elapsed_cost,
            timestamp=time.time(), text=text, descriptor=descriptor)
        self.query_log.append(entry)
        data_dir = self.config.get("data_dir")
        if data_dir:
            os.makedirs(data_dir, exist_ok=True)
            from .data import dump_json
            with open(os.path.join(data_dir, "query_log.jsonl"), "a",
                      encoding="utf-8") as handle:
                handle.write(dump_json(entry.to_dict(), pretty=False) + "\n")
        return digest

    def _describe_sql(self, stmt: SelectStmt, digest: str, result: EngineResult):
        tables = [stmt.table] + ([stmt.join.table] if stmt.join else [])
        equality = []
        ranges = []
        for condition in stmt.where:
            table = condition.column.table or stmt.table
            if condition.op == "=":
                equality.append((table, condition.column.name))
            elif condition.op in ("<", "<=", ">", ">="):
                ranges.append((table, condition.column.name))
        joins = []
        accesses = []
        matched = result.stats.matched_rows
        eq_col = equality[0][1] if equality and equality[0][0] == stmt.table else None
        accesses.append(TableAccess(stmt.table, eq_col,
                                    matched if eq_col is not None else 0))
        if stmt.join:
            right = stmt.join.table
            right_col = (stmt.join.right.name
                         if stmt.join.right.table in (right, None)
                         else stmt.join.left.name)
            joins.append((stmt.table, stmt.join.left.name, right, right_col))
            outer = len(self.relational.tables[stmt.table].rows) \
                if stmt.table in self.relational.tables else 0
            descriptor = QueryDescriptor(
                digest=digest, accesses=tuple(accesses),
                joins=(JoinStep(right, right_col, outer),),
                result_rows=len(result.rows))
        else:
            descriptor = QueryDescriptor(digest=digest, accesses=tuple(accesses),
                                         result_rows=len(result.rows))
        return (tuple(tables), tuple(equality), tuple(ranges), tuple(joins),
                descriptor)

    # -- tuning ------------------------------------------------------------------------------

    def tuner(self, seed: int | None = None, candidates=None) -> Tuner:
        if self._tuner is None or seed is not None or candidates is not None:
            if candidates is None:
                candidates = enumerate_index_candidates(
                    self.catalog, self.query_log,
                    window=self.config.get_int("tuner.window"))
            self._tuner = Tuner(
                self.relational, lambda: self.query_log, candidates,
                alpha=self.config.get_float("tuner.alpha"),
                gamma=self.config.get_float("tuner.gamma"),
                storage_penalty=self.config.get_float("tuner.lambda"),
                window=self.config.get_int("tuner.window"),
                rng=random.Random(seed if seed is not None else 0))
            if self._restored_q:
                self._tuner.q.values.update(self._restored_q)
                self._restored_q = None
        return self._tuner

    def tune(self, episodes: int, steps: int, seed: int | None = None) -> dict:
        tuner = self.tuner(seed=seed)
        with self.relational.lock.write():
            summaries = tuner.train(episodes, steps)
            self.version += 1
        last = summaries[-1]
        return {"episodes": episodes, "steps": steps,
                "total_reward": sum(s.total_reward for s in summaries),
                "final_cost": last.final_cost, "epsilon": last.epsilon,
                "status": tuner.status()}

    def tuner_status(self) -> dict:
        if self._tuner is None:
            return {"state": None, "epsilon": None, "q_size": 0,
                    "last_reward": 0.0, "actions_applied": 0}
        return self._tuner.status()

    def start_background_tuner(self, interval_s: float, steps: int = 10):
        """Optional periodic tuning; one loop at a time, never mid-query
        (action application serializes through the engine writer lock).
        Returns a stop callable."""
        import threading

        stop = threading.Event()

        def loop():
            while not stop.wait(interval_s):
                if self.query_log:
                    self.tune(episodes=1, steps=steps)

        thread = threading.Thread(target=loop, daemon=True, name="polyfed-tuner")
        thread.start()

        def cancel():
            stop.set()
            thread.join(timeout=interval_s + 5)

        return cancel

    # -- schema surface -----------------------------------------------------------------------

    def schema_payload(self) -> dict:
        schemas = [self.catalog.schemas[name] for name in self.catalog.table_names()]
        er = build_er_graph(schemas)
        return {
            "tables": {name: self.catalog.ddl(name) for name in self.catalog.table_names()},
            "collections": {name: paradigm.value
                            for name, paradigm in self.catalog.collections.items()},
            "er": {"entities": er.entities,
                   "relationships": [{"from": r.from_table, "to": r.to_table,
                                      "cardinality": r.cardinality, "via": r.via_field}
                                     for r in er.relationships]},
        }

    # -- persistence -----------------------------------------------------------------------------

    def snapshot(self, directory: str | None = None) -> dict:
        directory = directory or os.path.join(self.config.get("data_dir") or ".", "snapshot")
        stores = {
            "relational": self.relational.dump_lines(),
            "document": self.document.dump_lines(),
            "graph": self.graph.dump_lines(),
            "kv": self.kv.dump_lines(),
            "vector": self.vector.dump_lines(),
            "catalog": self._dump_catalog(),
            "qtable": self._dump_qtable(),
            "query_log": [entry.to_dict() for entry in self.query_log],
        }
        locks = [e.lock for e in self.registry.all_engines()]
        for lock in locks:
            lock.acquire_write()
        try:
            manifest = write_snapshot(directory, stores)
        finally:
            for lock in reversed(locks):
                lock.release_write()
        return {"directory": directory, "files": sorted(manifest["files"])}

    def restore(self, directory: str | None = None) -> dict:
        directory = directory or os.path.join(self.config.get("data_dir") or ".", "snapshot")
        stores = read_snapshot(directory)
        locks = [e.lock for e in self.registry.all_engines()]
        for lock in locks:
            lock.acquire_write()
        try:
            self.relational.load_lines(stores.get("relational", []))
            self.document.load_lines(stores.get("document", []))
            self.graph.load_lines(stores.get("graph", []))
            self.kv.load_lines(stores.get("kv", []))
            self.vector.load_lines(stores.get("vector", []))
            self._load_catalog(stores.get("catalog", []))
            self._load_qtable(stores.get("qtable", []))
            self.query_log = [QueryLogEntry.from_dict(d)
                              for d in stores.get("query_log", [])]
            self.version += 1
        finally:
            for lock in reversed(locks):
                lock.release_write()
        return {"directory": directory, "tables": self.catalog.table_names()}

    def _dump_catalog(self) -> list:
        lines = []
        for name in self.catalog.table_names():
            lines.append({"kind": "schema", "ddl": self.catalog.ddl(name)})
        for name, paradigm in self.catalog.collections.items():
            lines.append({"kind": "collection", "name": name,
                          "paradigm": paradigm.value})
        for record in self.catalog.segments.values():
            lines.append({"kind": "segment", "segment_id": record.segment_id,
                          "paradigm": record.paradigm.value,
                          "engine_id": record.engine_id, "target": record.target,
                          "record_count": record.record_count})
        return lines

    def _load_catalog(self, lines) -> None:
        from .schema import parse_ddl

        self.catalog = Catalog()
        for line in lines:
            if line["kind"] == "schema":
                self.catalog.register_schema(parse_ddl(line["ddl"]))
            elif line["kind"] == "collection":
                self.catalog.register_collection(
                    line["name"], StorageParadigm(line["paradigm"]))
            else:
                self.catalog.register_segment(SegmentRecord(
                    line["segment_id"], StorageParadigm(line["paradigm"]),
                    line["engine_id"], line["target"], line["record_count"]))
        self.grammar = nl.GrammarTranslator(self.catalog, clock=self.clock)

    def _dump_qtable(self) -> list:
        if self._tuner is None:
            return []
        lines = [{"kind": "meta", "epsilon": self._tuner.q.epsilon,
                  "candidates": [list(c) for c in self._tuner.index_candidates]}]
        for (state, action), value in sorted(self._tuner.q.values.items(),
                                             key=lambda item: repr(item[0])):
            index_bits, view_bits, buckets = state
            lines.append({"kind": "entry", "action": action, "value": float(value),
                          "index_bits": list(index_bits), "view_bits": list(view_bits),
                          "buckets": list(buckets)})
        return lines

    def _load_qtable(self, lines) -> None:
        values = {}
        for line in lines:
            if line["kind"] != "entry":
                continue
            state = (tuple(line["index_bits"]), tuple(line["view_bits"]),
                     tuple(line["buckets"]))
            values[(state, line["action"])] = float(line["value"])
        self._restored_q = values or None
        self._tuner = None

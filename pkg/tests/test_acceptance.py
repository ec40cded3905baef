"""Exit criteria, one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as the
criteria execute.  Tolerances are pinned here, not configurable.
"""

import json
import random
import time
import urllib.error
import urllib.request
from contextlib import contextmanager
from decimal import Decimal

import pytest

from polyfed import nl
from polyfed.costmodel import QueryDescriptor, TableAccess, TableStats
from polyfed.data import dump_json, parse_source
from polyfed.demo import (FRIEND_NAMES_ALL, GRAPH, KV_ENTRIES, PURCHASES, REVIEWS,
                          USERS, seed_demo)
from polyfed.engines import result_to_json
from polyfed.engines.relational import RelationalEngine
from polyfed.engines.vector import VectorEngine
from polyfed.errors import ChecksumMismatch, RefinementExhausted
from polyfed.federation import parse_plan
from polyfed.ingest import classify_format, extract_features
from polyfed.schema import FieldSpec, TableSchema, emit_ddl, infer_table_schema
from polyfed.server import start_background
from polyfed.tuner import (QTable, QueryLogEntry, Tuner, brute_force_optimal,
                           choose_action, q_update)

from .conftest import make_service
from .naive_plan import NaiveWorld, merge_reference, row_bag, row_seq
from .naive_sql import (QSpec, build_engine_tables, naive_eval, random_spec,
                        random_table, render_sql)
from .nl_corpus import run_corpus
from .oracles import (classify_reference, random_data_value, validate_reference,
                      value_iteration, vector_topk_reference)


@contextmanager
def criterion(number: int, name: str):
    try:
        yield
    except BaseException:
        print(f"[acceptance {number:02d}] {name}: FAIL")
        raise
    print(f"[acceptance {number:02d}] {name}: PASS")


# --- 1: classifier fidelity -----------------------------------------------------

def test_01_classifier_fidelity():
    with criterion(1, "rule-matrix fidelity"):
        canonical = [
            ({"nodes": [], "edges": []}, "graph"),
            ([{"a": 1}, {"b": 2}], "document"),
            ([[1, 2], [3, 4]], "relational"),
            ("free text", "unstructured"),
        ]
        for value, expected in canonical:
            assert classify_format(extract_features(value), "baseline").value == expected
        rng = random.Random(73001)
        mismatches = 0
        for _ in range(1000):
            value = random_data_value(rng)
            if classify_format(extract_features(value), "baseline").value \
                    != classify_reference(value):
                mismatches += 1
        assert mismatches == 0


# --- 2: schema inference fidelity ---------------------------------------------------

REFERENCE_PURCHASES_DDL = ("CREATE TABLE purchases (\n"
            "  id INTEGER PRIMARY KEY,\n"
            "  product TEXT,\n"
            "  price DECIMAL(10,2),\n"
            "  purchase_date DATE\n"
            ");")


def _normalize_trailing(text: str) -> str:
    return "\n".join(line.rstrip() for line in text.rstrip().splitlines())


def test_02_schema_inference_fidelity():
    with criterion(2, "sample-to-DDL fidelity"):
        sample = parse_source(
            b'{"id": 123, "product": "Headphones", "price": 149.99, '
            b'"purchase_date": "2024-01-11"}', "json")
        schema = infer_table_schema([sample], "purchases")
        assert _normalize_trailing(emit_ddl(schema)) == _normalize_trailing(REFERENCE_PURCHASES_DDL)


# --- 3: grammar corpus ----------------------------------------------------------------

def test_03_grammar_corpus():
    with criterion(3, "question corpus 100%"):
        service = make_service()
        seed_demo(service)
        outcomes = run_corpus(service)
        assert len(outcomes) >= 30
        failures = [(q, d) for q, ok, d in outcomes if not ok]
        assert not failures, failures


# --- 4: validator duality ------------------------------------------------------------------

def test_04_validator_duality():
    with criterion(4, "validator duality"):
        rng = random.Random(41104)
        vocabulary = ["purchases", "users", "orders", "items", "select",
                      "from", "where", "x"]
        for _ in range(1000):
            text = " ".join(rng.choice(vocabulary) for _ in range(rng.randint(0, 10)))
            schema = rng.sample(vocabulary, rng.randint(0, 5))
            query = nl.GeneratedQuery("sql", text or "q")
            assert nl.validate_query(query, schema, "paper").ok \
                == validate_reference(query.text, schema)

        service = make_service()
        seed_demo(service)
        hallucinated = [
            "SELECT id FROM prchases",
            "SELECT id FROM purchases_old",
            "SELECT prodcut FROM purchases",
            "SELECT price, quantity FROM purchases",
            "SELECT users.nmae FROM users",
            "SELECT id FROM purchases WHERE pricee > 1",
            "SELECT id FROM purchases GROUP BY categry",
            "SELECT id FROM purchases ORDER BY prodct",
            "SELECT purchases.id FROM purchases INNER JOIN usrs ON purchases.user_id = usrs.id",
            "SELECT ghost FROM users",
        ]
        clean = [
            "SELECT id FROM purchases",
            "SELECT product, price FROM purchases WHERE price > 100",
            "SELECT COUNT(*) FROM users",
            "SELECT category, SUM(price) AS total FROM purchases GROUP BY category",
            "SELECT id FROM purchases ORDER BY purchase_date DESC LIMIT 3",
            "SELECT users.name FROM users INNER JOIN purchases ON users.id = purchases.user_id",
            "SELECT id FROM users WHERE city = 'Austin'",
            "SELECT product FROM purchases WHERE category != 'pantry'",
            "SELECT MAX(price) FROM purchases",
            "SELECT id FROM purchases WHERE purchase_date >= '2024-01-01'",
        ]
        flagged = sum(
            not nl.validate_query(nl.GeneratedQuery("sql", text), [], "strict",
                                  service.catalog).ok
            for text in hallucinated)
        passed = sum(
            nl.validate_query(nl.GeneratedQuery("sql", text), [], "strict",
                              service.catalog).ok
            for text in clean)
        assert flagged == 10
        assert passed == 10


# --- 5: tuner convergence vs brute force ----------------------------------------------------

def _benchmark_engine() -> RelationalEngine:
    engine = RelationalEngine()
    for name, rows in (("orders", 2000), ("customers", 500), ("events", 1200)):
        schema = TableSchema(name, [FieldSpec("id", "INTEGER", False, True),
                                    FieldSpec("k", "INTEGER", True),
                                    FieldSpec("g", "INTEGER", True)],
                             primary_key="id")
        table = engine.create_table(schema)
        for i in range(rows):
            table.insert((i, i % 50, i % 7))
    return engine


def _benchmark_log() -> list:
    entries = []
    mix = [("orders", "k", 5)] * 40 + [("events", "k", 3)] * 30 + \
          [("customers", "k", 2)] * 20 + [("orders", None, 0)] * 10
    for i, (table, column, matches) in enumerate(mix):
        descriptor = QueryDescriptor(
            digest=f"bench{i}", accesses=(TableAccess(table, column, matches),),
            result_rows=matches)
        entries.append(QueryLogEntry(
            digest=descriptor.digest, dialect="sql", tables=(table,),
            equality_columns=((table, column),) if column else (),
            latency_ms=1.0, descriptor=descriptor))
    return entries


def test_05_tuner_convergence_vs_oracle():
    with criterion(5, "learned policy within 5% of brute force"):
        started = time.perf_counter()
        engine = _benchmark_engine()
        log = _benchmark_log()
        candidates = [("orders", "k"), ("orders", "g"), ("customers", "k"),
                      ("customers", "g"), ("events", "k"), ("events", "g")]
        descriptors = [entry.descriptor for entry in log]
        optimal_cost, _ = brute_force_optimal(
            descriptors, candidates, TableStats(engine.row_counts()))

        tuner = Tuner(engine, lambda: log, candidates, rewrite_rules=(),
                      alpha=0.1, gamma=0.9, epsilon=0.3, epsilon_decay=0.99,
                      rng=random.Random(20240215))
        tuner.train(episodes=250, steps=20)          # 5000 steps total
        tuner.reset_physical()
        rollout = tuner.greedy_rollout()
        elapsed = time.perf_counter() - started
        assert rollout.final_cost <= optimal_cost * 1.05
        assert elapsed < 60.0


# --- 6: Q-update exactness ----------------------------------------------------------------------

def test_06_q_update_exactness():
    with criterion(6, "Q-update exactness and tiny-MDP policy"):
        q = QTable(alpha=0.5, gamma=0.9)
        q_update(q, "s", 0, 0.0, "s", 1)
        assert abs(q.get("s", 0) - 0.0) <= 1e-12
        q = QTable(alpha=0.5, gamma=0.9)
        q_update(q, "s", 0, 1.0, "s2", 2)
        assert abs(q.get("s", 0) - 0.5) <= 1e-12

        q = QTable(alpha=0.5, gamma=0.9)
        q_update(q, "s0", 0, 1.0, "s1", 1)
        q_update(q, "s1", 0, 0.0, "s0", 1)
        q_update(q, "s0", 0, 1.0, "s1", 1)
        assert abs(q.get("s0", 0) - 0.85125) <= 1e-12
        assert abs(q.get("s1", 0) - 0.225) <= 1e-12

        def transition(s, a):
            return s if a == 0 else 1 - s

        def reward(s, a):
            return 1.0 if (s == 1 and a == 0) else 0.0

        _, expected_policy = value_iteration(2, 2, transition, reward, gamma=0.9)
        q = QTable(alpha=0.1, gamma=0.9)
        rng = random.Random(606)
        state = 0
        for _ in range(4000):
            action = choose_action(q, state, 0.3, rng, 2)
            next_state = transition(state, action)
            q_update(q, state, action, reward(state, action), next_state, 2)
            state = next_state
        assert [q.argmax(s, 2) for s in (0, 1)] == expected_policy


# --- 7: federation oracle -------------------------------------------------------------------------

def _federation_world():
    service = make_service()
    seed_demo(service)
    world = NaiveWorld(
        sql_tables={
            "users": ([c for c in ("id", "name", "city")], [dict(u) for u in USERS]),
            "purchases": ([c for c in ("id", "user_id", "product", "category",
                                       "price", "purchase_date")],
                          [dict(p) for p in PURCHASES]),
        },
        documents={"reviews": {f"d{i + 1:06d}": dict(r)
                               for i, r in enumerate(REVIEWS)}},
        graph={"nodes": {n["id"]: dict(n) for n in GRAPH["nodes"]},
               "edges": [(e["src"], e["type"], e["dst"]) for e in GRAPH["edges"]]},
        kv=dict(KV_ENTRIES),
    )
    return service, world


def _random_plan(rng):
    """(raw plan dict, naive node payloads) drawn from cross-engine templates."""
    kind = rng.choice(["sql", "document", "graph", "kv", "join", "concat"])
    if kind == "sql":
        spec = QSpec(table="purchases", star=True)
        if rng.random() < 0.7:
            spec = QSpec(table="purchases",
                         projections=[("col", "product", None), ("col", "price", None)],
                         where=[("price", rng.choice([">", "<", ">="]),
                                 Decimal(rng.choice(["50.00", "150.00", "400.00"])))])
        if rng.random() < 0.5:
            spec.order_by = [("price", rng.random() < 0.5)] if spec.projections else \
                [("id", False)]
        if rng.random() < 0.5:
            spec.limit = rng.randint(0, 12)
        nodes = [{"type": "sql", "query": render_sql(spec)}]
        payloads = [("sql", spec)]
        merge = []
    elif kind == "document":
        conjuncts = [("rating", rng.choice([">", "<", "="]), rng.randint(2, 5))]
        if rng.random() < 0.4:
            conjuncts.append(("meta.verified", "=", True))
        filter_text = " AND ".join(
            f"{path} {op} {str(lit).lower() if isinstance(lit, bool) else lit}"
            for path, op, lit in conjuncts)
        nodes = [{"type": "document", "query": f"reviews : {filter_text}"}]
        payloads = [("document", ("reviews", conjuncts))]
        merge = [{"op": "limit", "n": rng.randint(1, 5)}] if rng.random() < 0.3 else []
    elif kind == "graph":
        anchored = rng.random() < 0.5
        anchor = ("name", rng.choice(["Alice", "Bob", "Carol"])) if anchored else None
        pattern = "MATCH (u:User%s)-[:FRIEND]->(f) RETURN u.name, f.name" % (
            " {name:'%s'}" % anchor[1] if anchored else "")
        nodes = [{"type": "graph", "query": pattern}]
        payloads = [("graph", ("FRIEND", anchor, [("u", "name"), ("f", "name")]))]
        merge = []
    elif kind == "kv":
        key = rng.choice(sorted(KV_ENTRIES))
        nodes = [{"type": "kv", "query": f"GET {key}"}]
        payloads = [("kv", key)]
        merge = []
    elif kind == "join":
        product = rng.choice(["Headphones", "Laptop", "Desk"])
        sql = ("SELECT users.id AS user_id, users.name AS name FROM users "
               "INNER JOIN purchases ON users.id = purchases.user_id "
               f"WHERE purchases.product = '{product}'")
        spec = QSpec(
            table="users",
            projections=[("col", "users.id", "user_id"), ("col", "users.name", "name")],
            join=("purchases", "users.id", "purchases.user_id"),
            where=[("purchases.product", "=", product)])
        nodes = [{"type": "sql", "query": sql},
                 {"type": "graph",
                  "query": "MATCH (u:User)-[:FRIEND]->(f) RETURN u.user_id, f.name"}]
        payloads = [("sql", spec),
                    ("graph", ("FRIEND", None, [("u", "user_id"), ("f", "name")]))]
        merge = [{"op": "hash_join", "left_key": "user_id", "right_key": "user_id"},
                 {"op": "sort", "by": ["user_id", "right_name"]}]
        if rng.random() < 0.5:
            merge.append({"op": "limit", "n": rng.randint(1, 4)})
    else:
        where = [("category", "=", rng.choice(["electronics", "furniture"]))]
        spec_a = QSpec(table="purchases",
                       projections=[("col", "product", None), ("col", "price", None)],
                       where=where)
        spec_b = QSpec(table="purchases",
                       projections=[("col", "product", None), ("col", "price", None)],
                       where=[("price", ">", Decimal("300.00"))])
        nodes = [{"type": "sql", "query": render_sql(spec_a)},
                 {"type": "sql", "query": render_sql(spec_b)}]
        payloads = [("sql", spec_a), ("sql", spec_b)]
        merge = [{"op": "concat"},
                 {"op": "sort", "by": ["product", "price"]},
                 {"op": "limit", "n": rng.randint(2, 10)}]
    return {"nodes": nodes, "merge": merge}, payloads, merge


def test_07_federation_oracle():
    with criterion(7, "federated plans equal the naive evaluator"):
        service, world = _federation_world()
        rng = random.Random(70707)
        for _ in range(50):
            raw, payloads, merge_specs = _random_plan(rng)
            plan = parse_plan(raw)
            result = service.federator.execute_plan(plan)
            naive_nodes = [world.eval_node(t, p) for t, p in payloads]
            columns, rows = merge_reference(
                naive_nodes, merge_specs or [{"op": "concat"}])
            assert list(result.columns) == list(columns), raw
            engine_rows = [{i: row.get(c) for i, c in enumerate(result.columns)}
                           for row in result.rows]
            naive_rows = [dict(enumerate(r)) for r in rows]
            assert row_bag(range(len(columns)), engine_rows) == \
                row_bag(range(len(columns)), naive_rows), raw
            if any(s["op"] == "sort" for s in merge_specs):
                assert row_seq(range(len(columns)), engine_rows) == \
                    row_seq(range(len(columns)), naive_rows), raw

            serials = set()
            for _ in range(10):
                service.federator.delay_hook = \
                    lambda index: time.sleep(rng.random() * 0.004 * (index + 1))
                rerun = service.federator.execute_plan(parse_plan(raw))
                serials.add(result_to_json(rerun))
            service.federator.delay_hook = None
            assert len(serials) == 1, raw


# --- 8: published subquery object -----------------------------------------------------------------

def test_08_graph_subquery_object():
    with criterion(8, "graph subquery object executes on the seeded graph"):
        service = make_service()
        seed_demo(service)
        node = {"type": "graph",
                "query": "MATCH (u:User)-[:FRIEND]->(f) RETURN f.name"}
        result = service.run_plan({"nodes": [node], "merge": []})
        assert [row["name"] for row in result.rows] == FRIEND_NAMES_ALL


# --- 9: vector exactness ----------------------------------------------------------------------------

def test_09_vector_exactness():
    with criterion(9, "vector top-k equals the independent scorer"):
        rng = random.Random(90909)
        items = {f"v{i:05d}": [rng.uniform(-1, 1) for _ in range(32)]
                 for i in range(1000)}
        engine = VectorEngine()
        engine.ingest(items, "bench")
        for _ in range(20):
            query = [rng.uniform(-1, 1) for _ in range(32)]
            result = engine.topk(query, k=10)
            expected = vector_topk_reference(items, query, k=10)
            assert [r["id"] for r in result.rows] == [i for i, _ in expected]
            for row, (_, score) in zip(result.rows, expected):
                assert abs(row["score"] - score) < 1e-9
        anchor = "v00042"
        self_hit = engine.topk(items[anchor], k=1).rows[0]
        assert self_hit["id"] == anchor
        assert abs(self_hit["score"] - 1.0) <= 1e-9


# --- 10: SQL oracle -----------------------------------------------------------------------------------

def test_10_sql_engine_oracle():
    with criterion(10, "random SQL equals the naive interpreter"):
        rng = random.Random(101010)
        executed = 0
        while executed < 200:
            tables = {"t1": random_table(rng, "t1"), "t2": random_table(rng, "t2")}
            engine = RelationalEngine()
            build_engine_tables(engine, tables)
            specs = [random_spec(rng, tables) for _ in range(5)]
            plain = []
            for spec in specs:
                sql = render_sql(spec)
                expected_cols, expected_rows = naive_eval(spec, tables)
                result = engine.execute(sql)
                assert list(result.columns) == list(expected_cols), sql
                actual = [{i: row.get(c) for i, c in enumerate(result.columns)}
                          for row in result.rows]
                wanted = [dict(enumerate(r)) for r in expected_rows]
                assert row_bag(range(len(expected_cols)), actual) == \
                    row_bag(range(len(expected_cols)), wanted), sql
                plain.append((sql, result))
                executed += 1
            for name, (columns, _) in tables.items():
                for column, _type in rng.sample(columns, 2):
                    engine.manage_index("create", name, column)
            for sql, before in plain:
                after = engine.execute(sql)
                a = [{i: row.get(c) for i, c in enumerate(after.columns)}
                     for row in after.rows]
                b = [{i: row.get(c) for i, c in enumerate(before.columns)}
                     for row in before.rows]
                assert row_bag(range(len(after.columns)), a) == \
                    row_bag(range(len(before.columns)), b), sql


# --- 11: refinement bound and API totality ---------------------------------------------------------------

DOCUMENTED_STATUSES = {200, 400, 404, 405, 409, 422, 502, 504}


class _StubTranslator:
    def __init__(self, succeed_at):
        self.succeed_at = succeed_at
        self.calls = 0

    def translate(self, envelope, intent, attempt=1):
        self.calls += 1
        text = ("SELECT * FROM purchases" if attempt >= self.succeed_at
                else "SELECT * FROM missing_table")
        return nl.GeneratedQuery("sql", text, attempt, "llm")


def _drive_refinement(translator):
    envelope = nl.compose_envelope("q", "ctx")
    query = translator.translate(envelope, None, attempt=1)
    report = nl.validate_query(query, ["purchases"], "paper")
    while not report.ok:
        query = nl.refine(query, report, envelope, query.attempt, translator,
                          None, None, max_attempts=3)
        report = nl.validate_query(query, ["purchases"], "paper")
    return query


def test_11_refinement_bound_and_api_totality():
    with criterion(11, "refinement bound and endpoint totality"):
        translator = _StubTranslator(succeed_at=3)
        query = _drive_refinement(translator)
        assert query.attempt == 3 and translator.calls == 3

        translator = _StubTranslator(succeed_at=99)
        with pytest.raises(RefinementExhausted):
            _drive_refinement(translator)
        assert translator.calls == 3

        service = make_service()
        seed_demo(service)
        httpd, _ = start_background(service, port=0)
        base = f"http://127.0.0.1:{httpd.server_address[1]}"
        try:
            rng = random.Random(111111)
            bodies = [b"", b"{", b"[]", b"null", b'"q"', b"{}", b"[1,2,",
                      b'{"question": 7}', b'{"question": ""}',
                      b'{"question": "how many purchases", "session_id": 9}',
                      b'{"format": "json"}', b'{"format": "pdf", "payload": ""}',
                      b'{"format": "json", "payload": "{"}',
                      b'{"nodes": []}', b'{"nodes": [{"type": "blob", "query": "x"}]}',
                      b'{"nodes": [{"type": "sql", "query": "SELECT x FROM y"}]}',
                      b'{"nodes": [{"type": "sql", "query": "%"}]}',
                      b"\xff\xfe", b"@" * 2048]
            for _ in range(200):
                path = rng.choice(["/query", "/ingest", "/plan", "/session"])
                body = rng.choice(bodies)
                request = urllib.request.Request(
                    base + path, data=body, method="POST",
                    headers={"Content-Type": "application/json"})
                try:
                    with urllib.request.urlopen(request) as response:
                        status = response.status
                        json.loads(response.read().decode())
                except urllib.error.HTTPError as error:
                    status = error.code
                    payload = json.loads(error.read().decode())
                    assert "error" in payload and payload["error"]["code"], (path, body)
                assert status in DOCUMENTED_STATUSES, (path, body, status)
        finally:
            httpd.shutdown()


# --- 12: persistence ---------------------------------------------------------------------------------------

def test_12_persistence_round_trip(tmp_path):
    with criterion(12, "snapshot/restore byte-identical replay"):
        source = make_service()
        seed_demo(source)
        before = dump_json([(q, ok, d) for q, ok, d in run_corpus(source)])
        snap_dir = str(tmp_path / "snap")
        source.snapshot(snap_dir)

        restored = make_service()
        restored.restore(snap_dir)
        after = dump_json([(q, ok, d) for q, ok, d in run_corpus(restored)])
        assert before == after

        with open(f"{snap_dir}/graph.jsonl", "rb") as handle:
            blob = handle.read()
        with open(f"{snap_dir}/graph.jsonl", "wb") as handle:
            handle.write(blob[: max(len(blob) // 3, 1)])
        fresh = make_service()
        with pytest.raises(ChecksumMismatch):
            fresh.restore(snap_dir)
        assert fresh.catalog.table_names() == []
        assert fresh.graph.nodes == {}

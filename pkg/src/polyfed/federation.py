"""Federated execution: typed sub-queries, concurrent fan-out, merge layer.

A plan is a list of {"type","query"} nodes plus an ordered merge
pipeline (concat, hash_join, sort, limit).  All nodes of one plan read
under the same snapshot: the federator holds read locks on every touched
store until the merge finishes.  Results assemble in node order no
matter which thread finishes first, so output is reproducible.
"""

import concurrent.futures
import time
from dataclasses import dataclass
from decimal import Decimal

from .catalog import Catalog
from .concurrency import read_all
from .data import dump_json
from .engines import EngineResult, ResultStats, jsonable
from .errors import (ColumnMismatch, MissingJoinKey, NotTranslatable, PlanError,
                     PlanFormatError, PlanTimeout, UnjoinableFragments,
                     UnknownCollection, UnknownSubqueryType)
from .ingest import StorageParadigm
from .schema import singularize

DIALECTS = ("sql", "graph", "document", "kv", "vector")

_PARADIGM_OF_TYPE = {
    "sql": StorageParadigm.RELATIONAL,
    "document": StorageParadigm.DOCUMENT,
    "graph": StorageParadigm.GRAPH,
    "kv": StorageParadigm.KEYVALUE,
    "vector": StorageParadigm.VECTOR,
}

VERB_TABLES = {"bought": "purchases", "purchased": "purchases", "ordered": "orders"}


@dataclass(frozen=True)
class SubQuery:
    type: str
    query: str

    def to_dict(self) -> dict:
        return {"type": self.type, "query": self.query}


@dataclass(frozen=True)
class MergeSpec:
    kind: str                     # concat | hash_join | sort | limit
    left_key: str | None = None
    right_key: str | None = None
    columns: tuple = ()
    directions: tuple = ()
    n: int | None = None

    def to_dict(self) -> dict:
        if self.kind == "hash_join":
            return {"op": "hash_join", "left_key": self.left_key,
                    "right_key": self.right_key}
        if self.kind == "sort":
            data = {"op": "sort", "by": list(self.columns)}
            if any(d != "asc" for d in self.directions):
                data["directions"] = list(self.directions)
            return data
        if self.kind == "limit":
            return {"op": "limit", "n": self.n}
        return {"op": "concat"}


@dataclass
class QueryPlan:
    nodes: list
    merge: list
    snapshot_seq: int = 0

    def to_dict(self) -> dict:
        return {"nodes": [n.to_dict() for n in self.nodes],
                "merge": [m.to_dict() for m in self.merge]}


@dataclass
class PartialResult:
    node_index: int
    engine_id: str
    result: EngineResult | None = None
    error: Exception | None = None


# --- wire format ----------------------------------------------------------------

def parse_plan(raw: dict) -> QueryPlan:
    """Validate a raw plan object; node shape is exactly {"type","query"}."""
    if not isinstance(raw, dict) or "nodes" not in raw:
        raise PlanFormatError("a plan is an object with a 'nodes' list")
    nodes_raw = raw["nodes"]
    if not isinstance(nodes_raw, list) or not nodes_raw:
        raise PlanFormatError("'nodes' must be a non-empty list")
    nodes = []
    for i, node in enumerate(nodes_raw):
        if not isinstance(node, dict) or set(node) != {"type", "query"}:
            raise PlanFormatError(f"node {i} must be an object with type and query")
        if node["type"] not in DIALECTS:
            raise UnknownSubqueryType(f"node {i} has unknown type {node['type']!r}")
        if not isinstance(node["query"], str) or not node["query"].strip():
            raise PlanFormatError(f"node {i} query must be non-empty text")
        nodes.append(SubQuery(node["type"], node["query"]))

    merge = []
    for i, spec in enumerate(raw.get("merge", [])):
        if not isinstance(spec, dict) or "op" not in spec:
            raise PlanFormatError(f"merge stage {i} must be an object with an 'op'")
        op = spec["op"]
        if op == "concat":
            merge.append(MergeSpec("concat"))
        elif op == "hash_join":
            if "left_key" not in spec or "right_key" not in spec:
                raise PlanFormatError("hash_join needs left_key and right_key")
            merge.append(MergeSpec("hash_join", left_key=spec["left_key"],
                                   right_key=spec["right_key"]))
        elif op == "sort":
            columns = spec.get("by")
            if not isinstance(columns, list) or not columns:
                raise PlanFormatError("sort needs a non-empty 'by' list")
            directions = tuple(spec.get("directions", ["asc"] * len(columns)))
            if len(directions) != len(columns) \
                    or any(d not in ("asc", "desc") for d in directions):
                raise PlanFormatError("sort directions must be asc/desc per column")
            merge.append(MergeSpec("sort", columns=tuple(columns), directions=directions))
        elif op == "limit":
            n = spec.get("n")
            if not isinstance(n, int) or n < 0:
                raise PlanFormatError("limit needs a non-negative integer 'n'")
            merge.append(MergeSpec("limit", n=n))
        else:
            raise PlanFormatError(f"unknown merge op {op!r}")
    if not merge:
        merge = [MergeSpec("concat")]
    return QueryPlan(nodes=nodes, merge=merge)


def route_subquery(node: SubQuery, registry):
    """Map the node's type string to its engine; closed set, no fallback."""
    paradigm = _PARADIGM_OF_TYPE.get(node.type)
    if paradigm is None:
        raise UnknownSubqueryType(f"unknown subquery type {node.type!r}")
    engine = registry.engine_for(paradigm)
    if engine is None:
        raise UnknownSubqueryType(f"no engine serves subquery type {node.type!r}")
    return engine


# --- decomposition ---------------------------------------------------------------

def decompose(logical, catalog: Catalog, translator=None) -> QueryPlan:
    """Partition a logical query into typed sub-queries.

    Raw plan objects pass through after validation.  Intents become a
    one-node plan in their own paradigm, except the composite
    graph-with-relational-filter form, which yields an sql node plus a
    graph node joined on the `<entity>_id` key.
    """
    if isinstance(logical, dict):
        return parse_plan(logical)
    if not hasattr(logical, "kind") or not hasattr(logical, "slots"):
        raise PlanFormatError("a plan is an object with a 'nodes' list")

    intent = logical
    if intent.kind == "graph_traverse" and intent.slots.get("action_verb"):
        return _decompose_composite(intent, catalog, translator)

    if intent.kind in ("select", "aggregate_count", "topk"):
        entity = intent.slots.get("entity", "")
        if translator is None:
            raise NotTranslatable("decomposing an intent requires a translator")
        schema, _ = translator.resolve_entity(entity)
        if catalog.paradigm_of(schema.table_name) is not StorageParadigm.RELATIONAL:
            raise UnknownCollection(f"{schema.table_name} is not a relational collection")
        query = translator.translate(None, intent)
        return QueryPlan(nodes=[SubQuery("sql", query.text)], merge=[MergeSpec("concat")])

    if translator is None:
        raise NotTranslatable("decomposing an intent requires a translator")
    query = translator.translate(None, intent)
    return QueryPlan(nodes=[SubQuery(query.dialect, query.text)],
                     merge=[MergeSpec("concat")])


def _decompose_composite(intent, catalog: Catalog, translator) -> QueryPlan:
    verb = intent.slots["action_verb"]
    value = intent.slots["action_value"]
    entity = intent.slots.get("entity", "users")
    relation = intent.slots.get("relation", "FRIEND")

    action_table = VERB_TABLES.get(verb)
    if action_table is None or catalog.schema(action_table) is None:
        raise UnknownCollection(f"no collection backs the verb {verb!r}")
    if translator is None:
        raise NotTranslatable("composite decomposition requires a translator")
    entity_schema, _ = translator.resolve_entity(entity)
    entity_table = entity_schema.table_name

    join_key = f"{singularize(entity_table)}_id"
    action_schema = catalog.schema(action_table)
    if action_schema.field_named(join_key) is None or entity_schema.primary_key is None:
        raise UnjoinableFragments(
            f"no shared key between {entity_table} and {action_table}")

    filter_column = next(
        (s.name for s in action_schema.fields
         if s.sql_type == "TEXT" and not s.name.endswith("_id")), None)
    if filter_column is None:
        raise UnjoinableFragments(f"{action_table} has no text column to filter on")

    escaped = value.replace("'", "''")
    sql = (f"SELECT {entity_table}.{entity_schema.primary_key} AS {join_key}, "
           f"{entity_table}.name AS name "
           f"FROM {entity_table} INNER JOIN {action_table} "
           f"ON {entity_table}.{entity_schema.primary_key} = {action_table}.{join_key} "
           f"WHERE {action_table}.{filter_column} = '{escaped}'")
    pattern = f"MATCH (u:User)-[:{relation}]->(f) RETURN u.{join_key}, f.name"
    return QueryPlan(
        nodes=[SubQuery("sql", sql), SubQuery("graph", pattern)],
        merge=[MergeSpec("hash_join", left_key=join_key, right_key=join_key)])


# --- merge layer --------------------------------------------------------------------

def _row_serial(row: dict, columns) -> str:
    return dump_json([jsonable(row.get(c)) for c in columns], pretty=False)


def _concat(results) -> EngineResult:
    if len(results) == 1:
        return results[0]
    first = results[0]
    column_set = set(first.columns)
    for other in results[1:]:
        if set(other.columns) != column_set:
            raise ColumnMismatch(
                f"concat requires identical column sets: {first.columns} vs {other.columns}")
    rows = []
    for result in results:
        rows.extend({c: row.get(c) for c in first.columns} for row in result.rows)
    return EngineResult(columns=list(first.columns), rows=rows,
                        stats=_merge_stats(results))


def _merge_stats(results) -> ResultStats:
    return ResultStats(
        rows_scanned=sum(r.stats.rows_scanned for r in results),
        elapsed_cost=sum(r.stats.elapsed_cost for r in results),
        wall_ms=sum(r.stats.wall_ms for r in results))


def _hash_join(left: EngineResult, right: EngineResult, left_key: str,
               right_key: str) -> EngineResult:
    if left_key not in left.columns:
        raise MissingJoinKey(f"left input has no column {left_key!r}")
    if right_key not in right.columns:
        raise MissingJoinKey(f"right input has no column {right_key!r}")
    columns = list(left.columns)
    rename = {}
    for column in right.columns:
        name = f"right_{column}" if column in columns else column
        rename[column] = name
        columns.append(name)

    buckets: dict = {}
    for row in right.rows:
        key = row.get(right_key)
        if key is None:
            continue
        buckets.setdefault(_hashable(key), []).append(row)

    rows = []
    for lrow in left.rows:
        key = lrow.get(left_key)
        if key is None:
            continue
        for rrow in buckets.get(_hashable(key), []):
            combined = {c: lrow.get(c) for c in left.columns}
            for column, name in rename.items():
                combined[name] = rrow.get(column)
            rows.append(combined)
    return EngineResult(columns=columns, rows=rows, stats=_merge_stats([left, right]))


def _hashable(value):
    if isinstance(value, (list, dict)):
        return dump_json(jsonable(value), pretty=False)
    return value


def _sort_value_key(value):
    if value is None:
        return (0, "")
    if isinstance(value, bool):
        return (1, str(int(value)))
    if isinstance(value, (int, float, Decimal)):
        return (2, Decimal(str(value)))
    return (3, str(value))


def _sorted_rows(result: EngineResult, columns, directions) -> EngineResult:
    for column in columns:
        if column not in result.columns:
            raise ColumnMismatch(f"sort column {column!r} not in result columns")
    rows = sorted(result.rows, key=lambda r: _row_serial(r, result.columns))
    for column, direction in reversed(list(zip(columns, directions))):
        rows.sort(key=lambda r: _sort_value_key(r.get(column)),
                  reverse=(direction == "desc"))
    return EngineResult(columns=result.columns, rows=rows, stats=result.stats)


def aggregate_results(partials, merge) -> EngineResult:
    """Run the merge pipeline over successful partials in node order."""
    for partial in partials:
        if partial.error is not None:
            raise PlanError(partial.node_index, partial.error)
    current = [p.result for p in sorted(partials, key=lambda p: p.node_index)]
    for spec in merge:
        if spec.kind == "concat":
            current = [_concat(current)]
        elif spec.kind == "hash_join":
            if len(current) < 2:
                raise MissingJoinKey("hash_join needs two inputs")
            joined = _hash_join(current[0], current[1], spec.left_key, spec.right_key)
            current = [joined] + current[2:]
        elif spec.kind == "sort":
            current = [_sorted_rows(_concat(current), spec.columns, spec.directions)]
        elif spec.kind == "limit":
            combined = _concat(current)
            current = [EngineResult(columns=combined.columns,
                                    rows=combined.rows[:spec.n],
                                    stats=combined.stats)]
        else:
            raise PlanFormatError(f"unknown merge op {spec.kind!r}")
    return _concat(current)


# --- execution ---------------------------------------------------------------------------

class Federator:
    def __init__(self, registry, plan_timeout_ms: int = 30000, version_source=None):
        self.registry = registry
        self.plan_timeout_ms = plan_timeout_ms
        self.version_source = version_source or (lambda: 0)
        self.delay_hook = None          # test hook: callable(node_index)

    def execute_plan(self, plan: QueryPlan) -> EngineResult:
        """Fan out nodes concurrently under one read snapshot, then merge."""
        engines = [route_subquery(node, self.registry) for node in plan.nodes]
        touched = sorted({e.engine_id: e for e in engines}.values(),
                         key=lambda e: e.engine_id)
        with read_all([engine.lock for engine in touched]):
            plan.snapshot_seq = self.version_source()
            partials = self._run_nodes(plan, engines)
            return aggregate_results(partials, plan.merge)

    def _run_nodes(self, plan: QueryPlan, engines) -> list:
        partials = [PartialResult(i, engines[i].engine_id)
                    for i in range(len(plan.nodes))]

        def run(index: int):
            if self.delay_hook is not None:
                self.delay_hook(index)
            started = time.perf_counter()
            result = engines[index].execute(plan.nodes[index].query)
            result.stats.wall_ms = (time.perf_counter() - started) * 1000.0
            return result

        pool = concurrent.futures.ThreadPoolExecutor(max_workers=len(plan.nodes))
        try:
            futures = {pool.submit(run, i): i for i in range(len(plan.nodes))}
            _, not_done = concurrent.futures.wait(
                futures, timeout=self.plan_timeout_ms / 1000.0)
            if not_done:
                raise PlanTimeout(f"plan exceeded {self.plan_timeout_ms} ms")
            for future, index in futures.items():
                try:
                    partials[index].result = future.result()
                except Exception as exc:
                    partials[index].error = exc
            return partials
        finally:
            pool.shutdown(wait=False, cancel_futures=True)

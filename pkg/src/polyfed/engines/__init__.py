"""Embedded storage engines behind one uniform interface.

Each engine owns a reader-writer lock but does not take it internally;
the service and federator layers hold locks for the duration of a plan
or write so one read snapshot covers a whole plan.
"""

import datetime
from dataclasses import dataclass, field

from ..concurrency import RwLock
from ..data import dump_json
from ..ingest import StorageParadigm


@dataclass
class ResultStats:
    rows_scanned: int = 0
    used_index: str | None = None
    elapsed_cost: int = 0
    matched_rows: int = 0          # rows surviving filters, pre-projection
    wall_ms: float = 0.0           # informational only, never asserted on


@dataclass
class EngineResult:
    columns: list
    rows: list                     # mappings carrying exactly `columns`
    stats: ResultStats = field(default_factory=ResultStats)


def jsonable(value):
    """Convert result values to the JSON-friendly tree dump_json accepts."""
    if isinstance(value, datetime.datetime):
        return value.strftime("%Y-%m-%dT%H:%M:%S")
    if isinstance(value, datetime.date):
        return value.isoformat()
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, float):
        return value
    if hasattr(value, "item"):      # numpy scalar
        return value.item()
    return value


def result_to_json(result: EngineResult) -> str:
    """Canonical serialized form; byte-stable for equal results."""
    return dump_json({
        "columns": list(result.columns),
        "rows": [jsonable({c: row.get(c) for c in result.columns}) for row in result.rows],
        "stats": {
            "rows_scanned": result.stats.rows_scanned,
            "used_index": result.stats.used_index,
            "elapsed_cost": result.stats.elapsed_cost,
        },
    }, pretty=False)


class Engine:
    """Common engine surface: execute a dialect query, ingest, snapshot."""

    paradigm: StorageParadigm

    def __init__(self, engine_id: str):
        self.engine_id = engine_id
        self.lock = RwLock()

    def execute(self, text: str) -> EngineResult:
        raise NotImplementedError

    def ingest(self, payload, target: str) -> int:
        raise NotImplementedError

    def record_count(self, target: str) -> int:
        raise NotImplementedError

    def export_records(self, target: str):
        raise NotImplementedError

    def dump_lines(self) -> list:
        raise NotImplementedError

    def load_lines(self, lines) -> None:
        raise NotImplementedError


class EngineRegistry:
    """Exactly one engine per paradigm; mode rides along for routing."""

    def __init__(self, engines, mode: str = "extended"):
        self.mode = mode
        self._by_paradigm = {}
        self._by_id = {}
        for engine in engines:
            if engine.paradigm in self._by_paradigm:
                raise ValueError(f"duplicate engine for paradigm {engine.paradigm}")
            self._by_paradigm[engine.paradigm] = engine
            self._by_id[engine.engine_id] = engine

    def engine_for(self, paradigm: StorageParadigm):
        return self._by_paradigm.get(paradigm)

    def engine_by_id(self, engine_id: str):
        return self._by_id.get(engine_id)

    def all_engines(self):
        return list(self._by_paradigm.values())

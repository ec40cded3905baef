"""Key-value store with per-entry TTL against an injectable clock.

Query text: `GET <key>`; writes go through put/delete (the text dialect
is read-only because federated plans are read-only).
"""

import time

from ..errors import FilterSyntaxError, NotFound, PayloadShapeError
from ..ingest import StorageParadigm
from . import Engine, EngineResult, ResultStats


class KvEngine(Engine):
    paradigm = StorageParadigm.KEYVALUE

    def __init__(self, engine_id: str = "kv0", clock=time.monotonic):
        super().__init__(engine_id)
        self.clock = clock
        self.entries: dict[str, tuple] = {}     # key -> (value, expires_at | None)

    def _live(self, key: str) -> bool:
        if key not in self.entries:
            return False
        _, expires_at = self.entries[key]
        if expires_at is not None and self.clock() >= expires_at:
            del self.entries[key]
            return False
        return True

    def put(self, key: str, value, ttl_seconds: float | None = None) -> None:
        if not key:
            raise PayloadShapeError("key must be non-empty")
        expires_at = self.clock() + ttl_seconds if ttl_seconds is not None else None
        self.entries[key] = (value, expires_at)

    def get(self, key: str):
        if not self._live(key):
            raise NotFound(f"no value for key {key!r}")
        return self.entries[key][0]

    def delete(self, key: str) -> None:
        self.entries.pop(key, None)

    def execute(self, text: str) -> EngineResult:
        parts = text.strip().split(None, 1)
        if len(parts) != 2 or parts[0].upper() != "GET":
            raise FilterSyntaxError(f"unsupported kv query {text!r}")
        key = parts[1].strip()
        value = self.get(key)
        stats = ResultStats(rows_scanned=1, elapsed_cost=1)
        return EngineResult(columns=["key", "value"],
                            rows=[{"key": key, "value": value}], stats=stats)

    def ingest(self, payload, target: str) -> int:
        if not isinstance(payload, dict):
            raise PayloadShapeError("key-value ingest expects a mapping")
        for key, value in payload.items():
            self.put(str(key), value)
        return len(payload)

    def record_count(self, target: str) -> int:
        return sum(1 for key in list(self.entries) if self._live(key))

    def export_records(self, target: str):
        return {key: self.entries[key][0]
                for key in sorted(self.entries) if self._live(key)}

    def dump_lines(self) -> list:
        lines = []
        for key in sorted(self.entries):
            value, expires_at = self.entries[key]
            lines.append({"kind": "entry", "key": key, "value": value,
                          "expires_at": expires_at})
        return lines

    def load_lines(self, lines) -> None:
        self.entries = {}
        for line in lines:
            expires_at = line["expires_at"]
            if expires_at is not None:
                expires_at = float(expires_at)
            self.entries[line["key"]] = (line["value"], expires_at)

"""Vector store with exact brute-force top-k (no approximate index).

Query text: `SIMILAR TO <id> TOP <k>` scores against a stored vector;
`NEAREST [v1, v2, ...] TOP <k>` scores against a literal vector.
Cosine ranks by similarity descending, euclidean by distance ascending;
ties break by ascending item id.
"""

import re

import numpy as np

from ..errors import DimensionMismatch, FilterSyntaxError, NotFound, PayloadShapeError
from ..ingest import StorageParadigm
from . import Engine, EngineResult, ResultStats
from .. import costmodel

_SIMILAR_RE = re.compile(r"^\s*SIMILAR\s+TO\s+(\S+)\s+TOP\s+(\d+)\s*$", re.IGNORECASE)
_NEAREST_RE = re.compile(r"^\s*NEAREST\s+\[(.*)\]\s+TOP\s+(\d+)\s*$", re.IGNORECASE)


class VectorEngine(Engine):
    paradigm = StorageParadigm.VECTOR

    def __init__(self, engine_id: str = "vec0", metric: str = "cosine"):
        super().__init__(engine_id)
        self.dim: int | None = None
        self.metric = metric
        self.items: dict[str, np.ndarray] = {}

    def add(self, item_id: str, vector) -> None:
        array = np.asarray([float(x) for x in vector], dtype=np.float64)
        if self.dim is None:
            if array.size == 0:
                raise DimensionMismatch("vectors must be non-empty")
            self.dim = int(array.size)
        if array.size != self.dim:
            raise DimensionMismatch(f"expected dim {self.dim}, got {array.size}")
        if self.metric == "cosine" and not np.any(array):
            raise PayloadShapeError("cosine metric requires nonzero vectors")
        self.items[item_id] = array

    def topk(self, query, k: int) -> EngineResult:
        query = np.asarray([float(x) for x in query], dtype=np.float64)
        if self.dim is not None and query.size != self.dim:
            raise DimensionMismatch(f"query dim {query.size} != store dim {self.dim}")
        if k < 1:
            raise FilterSyntaxError("k must be >= 1")
        ids = sorted(self.items)
        if not ids:
            return EngineResult(columns=["id", "score"], rows=[],
                                stats=ResultStats(rows_scanned=0, elapsed_cost=0))
        matrix = np.stack([self.items[i] for i in ids])
        if self.metric == "cosine":
            norms = np.linalg.norm(matrix, axis=1) * np.linalg.norm(query)
            scores = matrix @ query / norms
            order = np.lexsort((np.arange(len(ids)), -scores))
        else:
            scores = np.linalg.norm(matrix - query, axis=1)
            order = np.lexsort((np.arange(len(ids)), scores))
        chosen = order[:min(k, len(ids))]
        rows = [{"id": ids[i], "score": float(scores[i])} for i in chosen]
        stats = ResultStats(rows_scanned=len(ids),
                            elapsed_cost=costmodel.scan_cost(len(ids)))
        return EngineResult(columns=["id", "score"], rows=rows, stats=stats)

    def execute(self, text: str) -> EngineResult:
        match = _SIMILAR_RE.match(text)
        if match:
            item_id, k = match.group(1), int(match.group(2))
            if item_id not in self.items:
                raise NotFound(f"no vector stored under id {item_id!r}")
            return self.topk(self.items[item_id], k)
        match = _NEAREST_RE.match(text)
        if match:
            try:
                query = [float(x) for x in match.group(1).split(",") if x.strip()]
            except ValueError as exc:
                raise FilterSyntaxError(f"bad vector literal: {exc}") from exc
            return self.topk(query, int(match.group(2)))
        raise FilterSyntaxError(f"unsupported vector query {text!r}")

    def ingest(self, payload, target: str) -> int:
        if isinstance(payload, dict):
            entries = [(str(key), value) for key, value in payload.items()]
        elif isinstance(payload, list):
            start = len(self.items)
            entries = [(f"v{start + i}", value) for i, value in enumerate(payload)]
        else:
            raise PayloadShapeError("vector ingest expects sequences or an id mapping")
        for item_id, vector in entries:
            if not isinstance(vector, list):
                raise PayloadShapeError("each vector must be a sequence of numbers")
            self.add(item_id, vector)
        return len(entries)

    def record_count(self, target: str) -> int:
        return len(self.items)

    def export_records(self, target: str):
        return {item_id: [float(x) for x in self.items[item_id]]
                for item_id in sorted(self.items)}

    def dump_lines(self) -> list:
        lines = [{"kind": "meta", "dim": self.dim, "metric": self.metric}]
        for item_id in sorted(self.items):
            lines.append({"kind": "item", "id": item_id,
                          "vector": [float(x) for x in self.items[item_id]]})
        return lines

    def load_lines(self, lines) -> None:
        self.items = {}
        self.dim = None
        for line in lines:
            if line["kind"] == "meta":
                self.metric = line["metric"]
                self.dim = line["dim"]
            else:
                self.add(line["id"], [float(x) for x in line["vector"]])

"""Graph store with a single-hop pattern matcher.

Pattern: MATCH (v1[:Label][{prop:'val'}])-[:TYPE]->(v2[:Label]) RETURN v.prop[, ...]
Bindings are enumerated over edges of the given type and returned
ordered by (source node id, destination node id).
"""

import re

from ..errors import PatternSyntaxError, PayloadShapeError
from ..ingest import StorageParadigm
from . import Engine, EngineResult, ResultStats
from .. import costmodel

_PATTERN_RE = re.compile(r"""
    ^\s*MATCH\s*
    \(\s*(?P<v1>[A-Za-z_][A-Za-z0-9_]*)\s*(?::\s*(?P<label1>[A-Za-z_][A-Za-z0-9_]*))?\s*
        (?:\{\s*(?P<prop>[A-Za-z_][A-Za-z0-9_]*)\s*:\s*'(?P<value>(?:[^']|'')*)'\s*\})?\s*\)
    \s*-\s*\[\s*:\s*(?P<etype>[A-Za-z_][A-Za-z0-9_]*)\s*\]\s*->\s*
    \(\s*(?P<v2>[A-Za-z_][A-Za-z0-9_]*)\s*(?::\s*(?P<label2>[A-Za-z_][A-Za-z0-9_]*))?\s*\)
    \s*RETURN\s+(?P<returns>.+?)\s*;?\s*$
""", re.VERBOSE | re.IGNORECASE)

_RETURN_ITEM_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\.([A-Za-z_][A-Za-z0-9_]*)$")


class GraphEngine(Engine):
    paradigm = StorageParadigm.GRAPH

    def __init__(self, engine_id: str = "graph0"):
        super().__init__(engine_id)
        self.nodes: dict[str, dict] = {}       # id -> {labels: set, props: dict}
        self.edges: list[tuple] = []           # (src, type, dst)

    def add_node(self, node_id: str, labels=(), props=None) -> None:
        self.nodes[node_id] = {"labels": set(labels), "props": dict(props or {})}

    def add_edge(self, src: str, edge_type: str, dst: str) -> None:
        if src not in self.nodes or dst not in self.nodes:
            raise PayloadShapeError(f"edge endpoints must exist: {src} -> {dst}")
        self.edges.append((src, edge_type, dst))

    def execute(self, text: str) -> EngineResult:
        match = _PATTERN_RE.match(text)
        if not match:
            raise PatternSyntaxError(f"unsupported pattern {text!r}")
        v1, v2 = match.group("v1"), match.group("v2")
        label1, label2 = match.group("label1"), match.group("label2")
        etype = match.group("etype")
        anchor = None
        if match.group("prop"):
            anchor = (match.group("prop"), match.group("value").replace("''", "'"))

        returns = []
        for item in match.group("returns").split(","):
            item_match = _RETURN_ITEM_RE.match(item.strip())
            if not item_match:
                raise PatternSyntaxError(f"unsupported return item {item.strip()!r}")
            var, prop = item_match.groups()
            if var not in (v1, v2):
                raise PatternSyntaxError(f"unbound variable {var!r} in RETURN")
            returns.append((var, prop))

        # Column naming: the property name, falling back to var.prop on collision.
        columns = []
        for var, prop in returns:
            name = prop if prop not in columns else f"{var}.{prop}"
            columns.append(name)

        def node_matches(node_id, label):
            node = self.nodes[node_id]
            return label is None or label in node["labels"]

        rows = []
        for src, edge_type, dst in sorted(self.edges, key=lambda e: (e[0], e[2], e[1])):
            if edge_type != etype:
                continue
            if not node_matches(src, label1) or not node_matches(dst, label2):
                continue
            if anchor is not None:
                prop, value = anchor
                if self.nodes[src]["props"].get(prop) != value:
                    continue
            binding = {v1: src, v2: dst}
            row = {}
            for (var, prop), column in zip(returns, columns):
                row[column] = self.nodes[binding[var]]["props"].get(prop)
            rows.append(row)

        stats = ResultStats(rows_scanned=len(self.edges),
                            elapsed_cost=costmodel.scan_cost(len(self.edges)))
        return EngineResult(columns=columns, rows=rows, stats=stats)

    def ingest(self, payload, target: str) -> int:
        if not isinstance(payload, dict) or "nodes" not in payload:
            raise PayloadShapeError("graph ingest expects a mapping with a 'nodes' key")
        nodes = payload.get("nodes") or []
        edges = payload.get("edges") or []
        if not isinstance(nodes, list) or not isinstance(edges, list):
            raise PayloadShapeError("'nodes' and 'edges' must be sequences")
        count = 0
        for i, node in enumerate(nodes):
            if not isinstance(node, dict):
                raise PayloadShapeError("each node must be a mapping")
            node_id = str(node.get("id", f"{target}_n{len(self.nodes) + i}"))
            labels = node.get("labels") or ([node["label"]] if "label" in node else [])
            props = {k: v for k, v in node.items() if k not in ("id", "labels", "label")}
            self.add_node(node_id, labels=[str(l) for l in labels], props=props)
            count += 1
        for edge in edges:
            if isinstance(edge, dict):
                src, etype, dst = edge.get("src"), edge.get("type"), edge.get("dst")
            elif isinstance(edge, list) and len(edge) == 3:
                src, etype, dst = edge
            else:
                raise PayloadShapeError("each edge must be {src,type,dst} or a triple")
            if src is None or etype is None or dst is None:
                raise PayloadShapeError("each edge must carry src, type, and dst")
            self.add_edge(str(src), str(etype), str(dst))
            count += 1
        return count

    def record_count(self, target: str) -> int:
        return len(self.nodes) + len(self.edges)

    def export_records(self, target: str):
        return {
            "nodes": [{"id": node_id, "labels": sorted(node["labels"]), **node["props"]}
                      for node_id, node in sorted(self.nodes.items())],
            "edges": [{"src": s, "type": t, "dst": d} for s, t, d in self.edges],
        }

    def dump_lines(self) -> list:
        lines = []
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            lines.append({"kind": "node", "id": node_id,
                          "labels": sorted(node["labels"]), "props": node["props"]})
        for src, etype, dst in self.edges:
            lines.append({"kind": "edge", "src": src, "type": etype, "dst": dst})
        return lines

    def load_lines(self, lines) -> None:
        self.nodes = {}
        self.edges = []
        for line in lines:
            if line["kind"] == "node":
                self.add_node(line["id"], labels=line["labels"], props=line["props"])
            else:
                self.add_edge(line["src"], line["type"], line["dst"])

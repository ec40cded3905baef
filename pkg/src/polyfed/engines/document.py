"""Document store with a conjunctive dotted-path filter language.

Query text: `<collection> : <filter>` where filter is
`path op literal [AND ...]`, ops = != < > contains, or the bare
collection name to return everything.  A missing path makes its
conjunct false; so does a type-incompatible comparison.
"""

import re
from decimal import Decimal

from ..errors import FilterSyntaxError, PayloadShapeError, UnknownCollection
from ..ingest import StorageParadigm
from . import Engine, EngineResult, ResultStats
from .. import costmodel

_CONJUNCT_RE = re.compile(
    r"^\s*(?P<path>[A-Za-z_][A-Za-z0-9_.]*)\s*"
    r"(?P<op>!=|=|<|>|\bcontains\b)\s*"
    r"(?P<literal>'(?:[^']|'')*'|-?\d+\.\d+|-?\d+|true|false|null)\s*$",
    re.IGNORECASE)


def parse_filter(text: str) -> list:
    """Split on AND and parse each `path op literal` conjunct."""
    conjuncts = []
    for part in re.split(r"\s+AND\s+", text.strip(), flags=re.IGNORECASE):
        match = _CONJUNCT_RE.match(part)
        if not match:
            raise FilterSyntaxError(f"bad filter conjunct {part!r}")
        literal = match.group("literal")
        lowered = literal.lower()
        if literal.startswith("'"):
            value = literal[1:-1].replace("''", "'")
        elif lowered == "true":
            value = True
        elif lowered == "false":
            value = False
        elif lowered == "null":
            value = None
        elif re.match(r"^-?\d+\.\d+$", literal):
            value = Decimal(literal)
        else:
            value = int(literal)
        conjuncts.append((match.group("path"), match.group("op").lower(), value))
    return conjuncts


def lookup_path(doc, path: str):
    """Walk dotted path through nested mappings; (found, value)."""
    node = doc
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            return False, None
        node = node[part]
    return True, node


def _is_number(value) -> bool:
    return isinstance(value, (int, Decimal)) and not isinstance(value, bool)


def conjunct_holds(doc, path: str, op: str, literal) -> bool:
    found, value = lookup_path(doc, path)
    if not found:
        return False
    if op == "=":
        return value == literal
    if op == "!=":
        return value != literal
    if op == "contains":
        if isinstance(value, str) and isinstance(literal, str):
            return literal in value
        if isinstance(value, list):
            return literal in value
        return False
    if not (_is_number(value) and _is_number(literal)):
        return False
    return value < literal if op == "<" else value > literal


class DocumentEngine(Engine):
    paradigm = StorageParadigm.DOCUMENT

    def __init__(self, engine_id: str = "doc0"):
        super().__init__(engine_id)
        self.collections: dict[str, dict] = {}
        self._next_id = 1

    def _collection(self, name: str) -> dict:
        if name not in self.collections:
            raise UnknownCollection(f"no collection named {name!r}")
        return self.collections[name]

    def execute(self, text: str) -> EngineResult:
        name, _, filter_text = text.partition(":")
        name = name.strip()
        if not name:
            raise FilterSyntaxError("missing collection name")
        collection = self._collection(name)
        conjuncts = parse_filter(filter_text) if filter_text.strip() else []

        matched = []
        for doc_id in sorted(collection):
            doc = collection[doc_id]
            if all(conjunct_holds(doc, path, op, lit) for path, op, lit in conjuncts):
                matched.append((doc_id, doc))

        columns = ["_id"]
        for _, doc in matched:
            for key in doc:
                if key not in columns:
                    columns.append(key)
        rows = []
        for doc_id, doc in matched:
            row = {"_id": doc_id}
            for column in columns[1:]:
                row[column] = doc.get(column)
            rows.append(row)
        stats = ResultStats(rows_scanned=len(collection),
                            elapsed_cost=costmodel.scan_cost(len(collection)))
        return EngineResult(columns=columns, rows=rows, stats=stats)

    def insert(self, name: str, doc: dict) -> str:
        doc_id = f"d{self._next_id:06d}"
        self._next_id += 1
        self.collections.setdefault(name, {})[doc_id] = doc
        return doc_id

    def ingest(self, payload, target: str) -> int:
        if isinstance(payload, dict):
            docs = [payload]
        elif isinstance(payload, list):
            docs = [d if isinstance(d, dict) else _wrap_scalar(d) for d in payload]
        else:
            docs = [_wrap_scalar(payload)]
        for doc in docs:
            self.insert(target, doc)
        return len(docs)

    def record_count(self, target: str) -> int:
        return len(self._collection(target))

    def export_records(self, target: str):
        collection = self._collection(target)
        return [collection[doc_id] for doc_id in sorted(collection)]

    def dump_lines(self) -> list:
        lines = [{"kind": "meta", "next_id": self._next_id}]
        for name in sorted(self.collections):
            lines.append({"kind": "collection", "name": name})
            collection = self.collections[name]
            for doc_id in sorted(collection):
                lines.append({"kind": "doc", "collection": name,
                              "id": doc_id, "body": collection[doc_id]})
        return lines

    def load_lines(self, lines) -> None:
        self.collections = {}
        self._next_id = 1
        for line in lines:
            if line["kind"] == "meta":
                self._next_id = line["next_id"]
            elif line["kind"] == "collection":
                self.collections.setdefault(line["name"], {})
            else:
                self.collections[line["collection"]][line["id"]] = line["body"]


def _wrap_scalar(value) -> dict:
    if isinstance(value, list):
        raise PayloadShapeError("cannot store a bare sequence as a document")
    return {"text": value if isinstance(value, str) else str(value)}

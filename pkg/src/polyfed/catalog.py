"""Shared catalog: table schemas, collection-paradigm map, segments.

The catalog is the one coupling point between modules: ingest registers
what it stored, the NL frontend reads schemas for context, the federator
resolves collection paradigms, and the tuner enumerates candidates.
"""

from dataclasses import dataclass

from .ingest import StorageParadigm
from .schema import TableSchema, emit_ddl


@dataclass
class SegmentRecord:
    segment_id: str
    paradigm: StorageParadigm
    engine_id: str
    target: str
    record_count: int


class Catalog:
    def __init__(self):
        self.schemas: dict[str, TableSchema] = {}
        self.collections: dict[str, StorageParadigm] = {}
        self.segments: dict[str, SegmentRecord] = {}

    # -- schemas -------------------------------------------------------

    def register_schema(self, schema: TableSchema) -> None:
        self.schemas[schema.table_name] = schema
        self.collections[schema.table_name] = StorageParadigm.RELATIONAL

    def schema(self, name: str):
        return self.schemas.get(name)

    def table_names(self) -> list:
        return list(self.schemas)

    def ddl(self, name: str) -> str:
        return emit_ddl(self.schemas[name])

    # -- collections ------------------------------------------------------

    def register_collection(self, name: str, paradigm: StorageParadigm) -> None:
        self.collections[name] = paradigm

    def paradigm_of(self, name: str):
        return self.collections.get(name)

    # -- segments ----------------------------------------------------------

    def register_segment(self, record: SegmentRecord) -> None:
        self.segments[record.segment_id] = record

    def is_empty(self) -> bool:
        return not self.schemas and not self.collections

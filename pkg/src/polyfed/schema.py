"""Schema inference: typed table schemas, DDL, ER graphs, optimizer hints.

The deterministic rule engine here is the reference implementation; a
remote model can produce the same DDL dialect and is re-parsed by the
same reader, so both paths meet identical contracts.
"""

import re
from dataclasses import dataclass, field
from decimal import Decimal

from .data import DATE_RE, TIMESTAMP_RE, dump_json
from .errors import EmptySample, IdentifierCollision, SqlSyntaxError

IDENTIFIER_RE = re.compile(r"^[a-z_][a-z0-9_]*$")
DECIMAL_TYPE_RE = re.compile(r"^DECIMAL\((\d+),(\d+)\)$")
SIMPLE_TYPES = ("INTEGER", "TEXT", "DATE", "TIMESTAMP", "BOOLEAN")


@dataclass
class FieldSpec:
    name: str
    sql_type: str                  # INTEGER | DECIMAL(p,s) | TEXT | DATE | TIMESTAMP | BOOLEAN
    nullable: bool = False
    pk_candidate: bool = False


@dataclass
class ForeignKey:
    local_field: str
    target_table: str
    target_field: str


@dataclass
class TableSchema:
    table_name: str
    fields: list
    primary_key: str | None = None
    foreign_keys: list = field(default_factory=list)

    def field_named(self, name: str):
        for spec in self.fields:
            if spec.name == name:
                return spec
        return None

    def field_names(self) -> list:
        return [spec.name for spec in self.fields]


@dataclass(frozen=True)
class Relationship:
    from_table: str
    to_table: str
    cardinality: str               # many_to_one | one_to_one
    via_field: str


@dataclass
class ErGraph:
    entities: list
    relationships: list

    def to_json(self) -> str:
        return dump_json({
            "entities": list(self.entities),
            "relationships": [
                {"from": r.from_table, "to": r.to_table,
                 "cardinality": r.cardinality, "via": r.via_field}
                for r in self.relationships
            ],
        }, pretty=True)

    def to_dot(self) -> str:
        lines = ["digraph er {"]
        for entity in self.entities:
            lines.append(f'  "{entity}" [shape=box];')
        for r in self.relationships:
            lines.append(f'  "{r.from_table}" -> "{r.to_table}" '
                         f'[label="{r.via_field} ({r.cardinality})"];')
        lines.append("}")
        return "\n".join(lines)


@dataclass
class OptimizerHints:
    index_suggestions: list = field(default_factory=list)      # (table, column, reason)
    constraint_suggestions: list = field(default_factory=list)  # (table, column, kind)
    partition_suggestions: list = field(default_factory=list)   # (table, column)


@dataclass
class SchemaPrompt:
    sample: dict
    task: str = "Generate SQL schema"

    def to_json(self, pretty: bool = True) -> str:
        return dump_json({"task": self.task, "input": {"sample_data": self.sample}},
                         pretty=pretty)


def compose_schema_prompt(sample: dict) -> SchemaPrompt:
    """Wrap a sample mapping in the fixed two-key prompt envelope."""
    return SchemaPrompt(sample=sample)


# --- identifiers --------------------------------------------------------------

def normalize_identifier(name: str) -> str:
    """Lowercase, squash non-alphanumerics to _, guard a leading digit."""
    ident = re.sub(r"[^a-z0-9_]", "_", name.lower())
    if not ident or ident[0].isdigit():
        ident = "t_" + ident
    return ident


def pluralize(stem: str) -> str:
    if stem.endswith("y") and len(stem) > 1 and stem[-2] not in "aeiou":
        return stem[:-1] + "ies"
    return stem + "s"


def singularize(name: str) -> str:
    if name.endswith("ies"):
        return name[:-3] + "y"
    if name.endswith("s") and not name.endswith("ss"):
        return name[:-1]
    return name


# --- field typing --------------------------------------------------------------

def infer_field_type(values) -> tuple[str, bool]:
    """Widen a sample of scalars to one SQL type plus nullability.

    INTEGER -> DECIMAL -> TEXT widening for numerics; uniform booleans,
    ISO dates, and ISO timestamps get their own types; any other mix is
    TEXT.  Nullable iff a null appears; an all-null sample is TEXT.
    """
    values = list(values)
    if not values:
        raise EmptySample("cannot infer a type from zero values")
    nullable = any(v is None for v in values)
    present = [v for v in values if v is not None]
    if not present:
        return "TEXT", True

    if all(isinstance(v, bool) for v in present):
        return "BOOLEAN", nullable
    if any(isinstance(v, bool) for v in present):
        return "TEXT", nullable

    if all(isinstance(v, int) for v in present):
        return "INTEGER", nullable
    if all(isinstance(v, (int, Decimal)) for v in present):
        scale = 1
        int_digits = 1
        for v in present:
            _, digits, exponent = Decimal(v).as_tuple()
            scale = max(scale, -exponent if exponent < 0 else 0)
            int_digits = max(int_digits, len(digits) + exponent)
        precision = max(10, int_digits + scale)
        return f"DECIMAL({precision},{scale})", nullable

    if all(isinstance(v, str) for v in present):
        if all(DATE_RE.match(v) for v in present):
            return "DATE", nullable
        if all(TIMESTAMP_RE.match(v) for v in present):
            return "TIMESTAMP", nullable
        return "TEXT", nullable
    return "TEXT", nullable


def _flatten(sample: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in sample.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, prefix=f"{path}_"))
        else:
            flat[path] = value
    return flat


def infer_table_schema(samples, source_name: str) -> TableSchema:
    """One FieldSpec per distinct key across samples, in first-seen order.

    A field named `id` or `<singular>_id` whose values are unique and
    never missing becomes the primary key.
    """
    samples = [_flatten(s) for s in samples]
    if not samples:
        raise EmptySample("no samples given")
    table_name = normalize_identifier(source_name)

    order: list[str] = []
    columns: dict[str, list] = {}
    seen_normalized: dict[str, str] = {}
    for sample in samples:
        for key in sample:
            ident = normalize_identifier(key)
            if ident not in columns:
                if ident in seen_normalized and seen_normalized[ident] != key:
                    raise IdentifierCollision(
                        f"{key!r} and {seen_normalized[ident]!r} both normalize to {ident!r}")
                seen_normalized[ident] = key
                columns[ident] = []
                order.append(ident)
            elif seen_normalized[ident] != key:
                raise IdentifierCollision(
                    f"{key!r} and {seen_normalized[ident]!r} both normalize to {ident!r}")
    for sample in samples:
        normalized = {normalize_identifier(k): v for k, v in sample.items()}
        for ident in order:
            columns[ident].append(normalized.get(ident))

    fields = []
    for ident in order:
        sql_type, nullable = infer_field_type(columns[ident])
        fields.append(FieldSpec(name=ident, sql_type=sql_type, nullable=nullable))

    primary_key = None
    for candidate in ("id", f"{singularize(table_name)}_id"):
        spec = next((f for f in fields if f.name == candidate), None)
        if spec is None:
            continue
        values = columns[candidate]
        if None not in values and len(set(values)) == len(values):
            spec.pk_candidate = True
            spec.nullable = False
            primary_key = candidate
            break

    return TableSchema(table_name=table_name, fields=fields, primary_key=primary_key)


# --- DDL ------------------------------------------------------------------------

def emit_ddl(schema: TableSchema) -> str:
    """Render CREATE TABLE text: one field per line, two-space indent."""
    lines = [f"CREATE TABLE {schema.table_name} ("]
    rendered = []
    fk_by_field = {fk.local_field: fk for fk in schema.foreign_keys}
    for spec in schema.fields:
        line = f"  {spec.name} {spec.sql_type}"
        if spec.name == schema.primary_key:
            line += " PRIMARY KEY"
        if spec.name in fk_by_field:
            fk = fk_by_field[spec.name]
            line += f" REFERENCES {fk.target_table}({fk.target_field})"
        rendered.append(line)
    lines.append(",\n".join(rendered))
    lines.append(");")
    return "\n".join(lines)


_DDL_RE = re.compile(r"^\s*CREATE\s+TABLE\s+([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*;?\s*$",
                     re.IGNORECASE | re.DOTALL)
_FIELD_RE = re.compile(
    r"^([A-Za-z_][A-Za-z0-9_]*)\s+"
    r"(INTEGER|TEXT|DATE|TIMESTAMP|BOOLEAN|DECIMAL\(\d+,\d+\))"
    r"(\s+PRIMARY\s+KEY)?"
    r"(?:\s+REFERENCES\s+([A-Za-z_][A-Za-z0-9_]*)\(([A-Za-z_][A-Za-z0-9_]*)\))?$",
    re.IGNORECASE)


def parse_ddl(ddl: str) -> TableSchema:
    """Reader for the emit_ddl dialect; round-trips names, types, pk, FKs."""
    match = _DDL_RE.match(ddl)
    if not match:
        raise SqlSyntaxError(0, "not a CREATE TABLE statement in the supported dialect")
    table_name = match.group(1).lower()
    schema = TableSchema(table_name=table_name, fields=[])
    body = match.group(2)
    for raw in _split_top_level(body):
        part = " ".join(raw.split())
        if not part:
            continue
        fmatch = _FIELD_RE.match(part)
        if not fmatch:
            raise SqlSyntaxError(ddl.find(raw), f"unsupported field clause {part!r}")
        name = fmatch.group(1).lower()
        sql_type = fmatch.group(2).upper().replace(" ", "")
        is_pk = fmatch.group(3) is not None
        spec = FieldSpec(name=name, sql_type=sql_type,
                         nullable=not is_pk, pk_candidate=is_pk)
        schema.fields.append(spec)
        if is_pk:
            schema.primary_key = name
        if fmatch.group(4):
            schema.foreign_keys.append(
                ForeignKey(name, fmatch.group(4).lower(), fmatch.group(5).lower()))
    if not schema.fields:
        raise SqlSyntaxError(0, "CREATE TABLE with no fields")
    return schema


def _split_top_level(body: str):
    parts, depth, current = [], 0, []
    for char in body:
        if char == "(":
            depth += 1
        elif char == ")":
            depth -= 1
        if char == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(char)
    parts.append("".join(current))
    return parts


# --- ER graph ----------------------------------------------------------------------

def build_er_graph(schemas) -> ErGraph:
    """Infer FK edges from `<stem>_id` fields targeting a `<stem>s(id)` table."""
    by_name = {schema.table_name: schema for schema in schemas}
    relationships = []
    for schema in schemas:
        explicit = {fk.local_field for fk in schema.foreign_keys}
        for fk in schema.foreign_keys:
            cardinality = "one_to_one" if fk.local_field == schema.primary_key else "many_to_one"
            relationships.append(Relationship(schema.table_name, fk.target_table,
                                              cardinality, fk.local_field))
        for spec in schema.fields:
            if not spec.name.endswith("_id") or spec.name in explicit:
                continue
            stem = spec.name[:-3]
            target = by_name.get(pluralize(stem))
            if target is None or target is schema or target.primary_key != "id":
                continue
            cardinality = "one_to_one" if spec.name == schema.primary_key else "many_to_one"
            relationships.append(Relationship(schema.table_name, target.table_name,
                                              cardinality, spec.name))
            schema.foreign_keys.append(ForeignKey(spec.name, target.table_name, "id"))
    return ErGraph(entities=[s.table_name for s in schemas], relationships=relationships)


# --- optimizer hints ------------------------------------------------------------------

HOT_EQUALITY_THRESHOLD = 0.3
HOT_RANGE_THRESHOLD = 0.3


def generate_hints(schemas, workload=None) -> OptimizerHints:
    """Constraint hints from schema shape; index/partition hints from workload.

    Workload entries expose `equality_columns` and `range_columns` as
    (table, column) pairs; a column crossing the 30% frequency threshold
    earns a suggestion.
    """
    hints = OptimizerHints()
    for schema in schemas:
        if schema.primary_key:
            hints.constraint_suggestions.append((schema.table_name, schema.primary_key, "unique"))
        for spec in schema.fields:
            if not spec.nullable:
                hints.constraint_suggestions.append((schema.table_name, spec.name, "not_null"))

    if workload:
        total = len(workload)
        eq_counts: dict[tuple, int] = {}
        range_counts: dict[tuple, int] = {}
        for entry in workload:
            for pair in set(entry.equality_columns):
                eq_counts[pair] = eq_counts.get(pair, 0) + 1
            for pair in set(entry.range_columns):
                range_counts[pair] = range_counts.get(pair, 0) + 1
        by_name = {schema.table_name: schema for schema in schemas}
        for (table, column), count in sorted(eq_counts.items()):
            if count / total >= HOT_EQUALITY_THRESHOLD:
                hints.index_suggestions.append((table, column, "HOT_EQUALITY"))
        for (table, column), count in sorted(range_counts.items()):
            if count / total < HOT_RANGE_THRESHOLD:
                continue
            schema = by_name.get(table)
            spec = schema.field_named(column) if schema else None
            if spec is not None and spec.sql_type == "DATE":
                hints.partition_suggestions.append((table, column))
    return hints

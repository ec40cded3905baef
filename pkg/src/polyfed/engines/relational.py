"""Mini-SQL engine: parser, executor, and ordered-multimap indexes.

Supported grammar (one statement per call):

    SELECT proj [, proj ...] FROM t [INNER JOIN t2 ON a = b]
        [WHERE cond AND cond ...] [GROUP BY col [, col ...]]
        [ORDER BY col [ASC|DESC] [, ...]] [LIMIT n]
    CREATE TABLE ... ;            -- the emit_ddl dialect
    INSERT INTO t [(cols)] VALUES (v, ...) [, (v, ...) ...]

    proj  := * | col [AS alias] | COUNT(*) | SUM|AVG|MIN|MAX(col) [AS alias]
    cond  := col op literal | col IS [NOT] NULL     op in = != < <= > >=

Excluded on purpose: subqueries, OR, and three-valued NULL logic beyond
IS NULL (comparisons against NULL are simply false).  Aggregation over
an empty input yields SQL's usual NULLs; AVG divides exact decimals.
"""

import datetime
import re
from bisect import bisect_left, insort
from dataclasses import dataclass
from decimal import Decimal

from .. import costmodel
from ..data import DATE_RE, TIMESTAMP_RE
from ..errors import (DuplicateIndex, NoSuchIndex, SchemaMismatch, SqlSyntaxError,
                      TypeMismatch, UnknownColumn, UnknownTable)
from ..ingest import StorageParadigm
from ..schema import TableSchema, emit_ddl, parse_ddl
from . import Engine, EngineResult, ResultStats

COMPARE_OPS = ("=", "!=", "<", "<=", ">", ">=")


# --- tokenizer -----------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<string>'(?:[^']|'')*')
  | (?P<decimal>-?\d+\.\d+)
  | (?P<int>-?\d+)
  | (?P<op><=|>=|!=|=|<|>)
  | (?P<punct>[(),.;*])
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(sql: str) -> list:
    tokens = []
    pos = 0
    while pos < len(sql):
        match = _TOKEN_RE.match(sql, pos)
        if not match:
            raise SqlSyntaxError(pos, f"unexpected character {sql[pos]!r}")
        kind = match.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, match.group(), pos))
        pos = match.end()
    return tokens


class _Cursor:
    def __init__(self, tokens, length):
        self.tokens = tokens
        self.i = 0
        self.length = length

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self):
        token = self.peek()
        if token is None:
            raise SqlSyntaxError(self.length, "unexpected end of statement")
        self.i += 1
        return token

    def accept_word(self, *words):
        token = self.peek()
        if token and token.kind == "word" and token.text.upper() in words:
            self.i += 1
            return token
        return None

    def expect_word(self, word):
        token = self.accept_word(word)
        if token is None:
            bad = self.peek()
            pos = bad.pos if bad else self.length
            raise SqlSyntaxError(pos, f"expected {word}")
        return token

    def expect_punct(self, char):
        token = self.peek()
        if token and token.kind == "punct" and token.text == char:
            self.i += 1
            return token
        pos = token.pos if token else self.length
        raise SqlSyntaxError(pos, f"expected {char!r}")

    def accept_punct(self, char):
        token = self.peek()
        if token and token.kind == "punct" and token.text == char:
            self.i += 1
            return token
        return None


# --- AST ------------------------------------------------------------------------

@dataclass(frozen=True)
class ColumnRef:
    table: str | None
    name: str

    def text(self) -> str:
        return f"{self.table}.{self.name}" if self.table else self.name


@dataclass(frozen=True)
class Projection:
    kind: str                       # star | column | aggregate
    func: str | None = None         # COUNT SUM AVG MIN MAX
    column: ColumnRef | None = None
    alias: str | None = None

    def output_name(self) -> str:
        if self.alias:
            return self.alias
        if self.kind == "aggregate":
            inner = "*" if self.func == "COUNT" and self.column is None else self.column.text()
            return f"{self.func}({inner})"
        return self.column.text()


@dataclass(frozen=True)
class Condition:
    column: ColumnRef
    op: str                         # comparison op, IS_NULL, IS_NOT_NULL
    value: object = None


@dataclass(frozen=True)
class JoinClause:
    table: str
    left: ColumnRef
    right: ColumnRef


@dataclass(frozen=True)
class OrderItem:
    column: ColumnRef
    descending: bool = False


@dataclass(frozen=True)
class SelectStmt:
    projections: tuple
    table: str
    join: JoinClause | None = None
    where: tuple = ()
    group_by: tuple = ()
    order_by: tuple = ()
    limit: int | None = None


@dataclass(frozen=True)
class InsertStmt:
    table: str
    columns: tuple | None
    rows: tuple


def _parse_column_ref(cur: _Cursor) -> ColumnRef:
    first = cur.next()
    if first.kind != "word":
        raise SqlSyntaxError(first.pos, "expected a column name")
    if cur.accept_punct("."):
        second = cur.next()
        if second.kind != "word":
            raise SqlSyntaxError(second.pos, "expected a column name after '.'")
        return ColumnRef(first.text.lower(), second.text.lower())
    return ColumnRef(None, first.text.lower())


def _parse_literal(cur: _Cursor):
    token = cur.next()
    if token.kind == "string":
        return token.text[1:-1].replace("''", "'")
    if token.kind == "int":
        return int(token.text)
    if token.kind == "decimal":
        return Decimal(token.text)
    if token.kind == "word":
        upper = token.text.upper()
        if upper == "NULL":
            return None
        if upper == "TRUE":
            return True
        if upper == "FALSE":
            return False
    raise SqlSyntaxError(token.pos, f"expected a literal, got {token.text!r}")


def _parse_projection(cur: _Cursor) -> Projection:
    token = cur.peek()
    if token.kind == "punct" and token.text == "*":
        cur.next()
        return Projection(kind="star")
    if token.kind == "word" and token.text.upper() in ("COUNT", "SUM", "AVG", "MIN", "MAX"):
        lookahead = cur.tokens[cur.i + 1] if cur.i + 1 < len(cur.tokens) else None
        if lookahead and lookahead.kind == "punct" and lookahead.text == "(":
            func = cur.next().text.upper()
            cur.expect_punct("(")
            if func == "COUNT" and cur.accept_punct("*"):
                column = None
            else:
                column = _parse_column_ref(cur)
            cur.expect_punct(")")
            alias = None
            if cur.accept_word("AS"):
                alias = cur.next().text.lower()
            return Projection(kind="aggregate", func=func, column=column, alias=alias)
    column = _parse_column_ref(cur)
    alias = None
    if cur.accept_word("AS"):
        alias = cur.next().text.lower()
    return Projection(kind="column", column=column, alias=alias)


def _parse_where(cur: _Cursor) -> tuple:
    conditions = []
    while True:
        column = _parse_column_ref(cur)
        if cur.accept_word("IS"):
            if cur.accept_word("NOT"):
                cur.expect_word("NULL")
                conditions.append(Condition(column, "IS_NOT_NULL"))
            else:
                cur.expect_word("NULL")
                conditions.append(Condition(column, "IS_NULL"))
        else:
            op_token = cur.next()
            if op_token.kind != "op":
                raise SqlSyntaxError(op_token.pos, f"expected a comparison, got {op_token.text!r}")
            conditions.append(Condition(column, op_token.text, _parse_literal(cur)))
        if not cur.accept_word("AND"):
            break
    return tuple(conditions)


def parse_select(cur: _Cursor) -> SelectStmt:
    cur.expect_word("SELECT")
    projections = [_parse_projection(cur)]
    while cur.accept_punct(","):
        projections.append(_parse_projection(cur))
    cur.expect_word("FROM")
    table = cur.next()
    if table.kind != "word":
        raise SqlSyntaxError(table.pos, "expected a table name")

    join = None
    if cur.accept_word("INNER"):
        cur.expect_word("JOIN")
        join_table = cur.next()
        cur.expect_word("ON")
        left = _parse_column_ref(cur)
        op = cur.next()
        if op.kind != "op" or op.text != "=":
            raise SqlSyntaxError(op.pos, "join condition must be an equality")
        right = _parse_column_ref(cur)
        join = JoinClause(join_table.text.lower(), left, right)

    where = ()
    if cur.accept_word("WHERE"):
        where = _parse_where(cur)

    group_by = ()
    if cur.accept_word("GROUP"):
        cur.expect_word("BY")
        group_by = [_parse_column_ref(cur)]
        while cur.accept_punct(","):
            group_by.append(_parse_column_ref(cur))
        group_by = tuple(group_by)

    order_by = ()
    if cur.accept_word("ORDER"):
        cur.expect_word("BY")
        items = []
        while True:
            column = _parse_column_ref(cur)
            descending = False
            if cur.accept_word("DESC"):
                descending = True
            elif cur.accept_word("ASC"):
                pass
            items.append(OrderItem(column, descending))
            if not cur.accept_punct(","):
                break
        order_by = tuple(items)

    limit = None
    if cur.accept_word("LIMIT"):
        token = cur.next()
        if token.kind != "int" or int(token.text) < 0:
            raise SqlSyntaxError(token.pos, "LIMIT expects a non-negative integer")
        limit = int(token.text)

    cur.accept_punct(";")
    trailing = cur.peek()
    if trailing is not None:
        raise SqlSyntaxError(trailing.pos, f"unexpected trailing input {trailing.text!r}")
    return SelectStmt(tuple(projections), table.text.lower(), join,
                      where, group_by, order_by, limit)


def parse_insert(cur: _Cursor) -> InsertStmt:
    cur.expect_word("INSERT")
    cur.expect_word("INTO")
    table = cur.next()
    columns = None
    if cur.accept_punct("("):
        columns = [cur.next().text.lower()]
        while cur.accept_punct(","):
            columns.append(cur.next().text.lower())
        cur.expect_punct(")")
        columns = tuple(columns)
    cur.expect_word("VALUES")
    rows = []
    while True:
        cur.expect_punct("(")
        values = [_parse_literal(cur)]
        while cur.accept_punct(","):
            values.append(_parse_literal(cur))
        cur.expect_punct(")")
        rows.append(tuple(values))
        if not cur.accept_punct(","):
            break
    cur.accept_punct(";")
    trailing = cur.peek()
    if trailing is not None:
        raise SqlSyntaxError(trailing.pos, f"unexpected trailing input {trailing.text!r}")
    return InsertStmt(table.text.lower(), columns, tuple(rows))


def parse_statement(sql: str):
    tokens = tokenize(sql)
    if not tokens:
        raise SqlSyntaxError(0, "empty statement")
    cur = _Cursor(tokens, len(sql))
    head = tokens[0].text.upper()
    if head == "SELECT":
        return parse_select(cur)
    if head == "INSERT":
        return parse_insert(cur)
    if head == "CREATE":
        return parse_ddl(sql)
    raise SqlSyntaxError(tokens[0].pos, f"unsupported statement {head}")


# --- storage -----------------------------------------------------------------------

def _sort_key(value):
    """Total order across None, bools, numbers, dates, and text."""
    if value is None:
        return (0, "")
    if isinstance(value, bool):
        return (1, str(int(value)))
    if isinstance(value, (int, Decimal)):
        return (2, Decimal(value))
    if isinstance(value, (datetime.date, datetime.datetime)):
        return (3, value.isoformat())
    if isinstance(value, str):
        return (4, value)
    return (5, repr(value))


def _coerce(value, sql_type: str, column: str):
    """Coerce a literal to the column's storage type or raise TypeMismatch."""
    if value is None:
        return None
    if sql_type == "INTEGER":
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeMismatch(f"column {column} is INTEGER, got {value!r}")
        return value
    if sql_type.startswith("DECIMAL"):
        if isinstance(value, bool) or not isinstance(value, (int, Decimal)):
            raise TypeMismatch(f"column {column} is DECIMAL, got {value!r}")
        return Decimal(value)
    if sql_type == "TEXT":
        if not isinstance(value, str):
            raise TypeMismatch(f"column {column} is TEXT, got {value!r}")
        return value
    if sql_type == "DATE":
        if isinstance(value, datetime.date) and not isinstance(value, datetime.datetime):
            return value
        if isinstance(value, str) and DATE_RE.match(value):
            return datetime.date.fromisoformat(value)
        raise TypeMismatch(f"column {column} is DATE, got {value!r}")
    if sql_type == "TIMESTAMP":
        if isinstance(value, datetime.datetime):
            return value
        if isinstance(value, str) and TIMESTAMP_RE.match(value):
            return datetime.datetime.fromisoformat(value.rstrip("Z"))
        raise TypeMismatch(f"column {column} is TIMESTAMP, got {value!r}")
    if sql_type == "BOOLEAN":
        if not isinstance(value, bool):
            raise TypeMismatch(f"column {column} is BOOLEAN, got {value!r}")
        return value
    raise TypeMismatch(f"unsupported column type {sql_type}")


class RelationalTable:
    def __init__(self, schema: TableSchema):
        self.schema = schema
        self.rows: list[tuple] = []
        self.indexes: dict[str, list] = {}      # column -> sorted [(key, pos)]

    @property
    def name(self) -> str:
        return self.schema.table_name

    def column_position(self, column: str) -> int:
        for i, spec in enumerate(self.schema.fields):
            if spec.name == column:
                return i
        raise UnknownColumn(f"{self.name} has no column {column!r}")

    def insert(self, values: tuple) -> None:
        if len(values) != len(self.schema.fields):
            raise SchemaMismatch(
                f"{self.name} expects {len(self.schema.fields)} values, got {len(values)}")
        coerced = []
        for value, spec in zip(values, self.schema.fields):
            if value is None and not spec.nullable:
                raise TypeMismatch(f"column {spec.name} is not nullable")
            coerced.append(_coerce(value, spec.sql_type, spec.name))
        pos = len(self.rows)
        self.rows.append(tuple(coerced))
        for column, entries in self.indexes.items():
            key = coerced[self.column_position(column)]
            if key is not None:
                insort(entries, (key, pos))

    def build_index(self, column: str) -> None:
        col = self.column_position(column)
        entries = [(row[col], pos) for pos, row in enumerate(self.rows)
                   if row[col] is not None]
        entries.sort()
        self.indexes[column] = entries

    def index_lookup(self, column: str, value) -> list:
        """Positions of rows whose column equals value, ascending."""
        entries = self.indexes[column]
        positions = []
        i = bisect_left(entries, (value,))
        while i < len(entries) and entries[i][0] == value:
            positions.append(entries[i][1])
            i += 1
        return sorted(positions)


class RelationalEngine(Engine):
    paradigm = StorageParadigm.RELATIONAL

    def __init__(self, engine_id: str = "rel0"):
        super().__init__(engine_id)
        self.tables: dict[str, RelationalTable] = {}
        self.enabled_rewrites: set[str] = set()

    # -- table lifecycle --------------------------------------------------

    def create_table(self, schema: TableSchema) -> RelationalTable:
        table = RelationalTable(schema)
        self.tables[schema.table_name] = table
        return table

    def table(self, name: str) -> RelationalTable:
        if name not in self.tables:
            raise UnknownTable(f"no table named {name!r}")
        return self.tables[name]

    def row_counts(self) -> dict:
        return {name: len(t.rows) for name, t in self.tables.items()}

    # -- index management --------------------------------------------------

    def manage_index(self, action: str, table_name: str, column: str) -> dict:
        table = self.table(table_name)
        table.column_position(column)
        if action == "create":
            if column in table.indexes:
                raise DuplicateIndex(f"index on {table_name}.{column} already exists")
            table.build_index(column)
        elif action == "drop":
            if column not in table.indexes:
                raise NoSuchIndex(f"no index on {table_name}.{column}")
            del table.indexes[column]
        else:
            raise ValueError(f"unknown index action {action!r}")
        return {"action": action, "table": table_name, "column": column}

    def index_pairs(self) -> set:
        return {(name, column) for name, t in self.tables.items() for column in t.indexes}

    def audit_indexes(self) -> bool:
        """Every index entry points at a live row with the matching key and
        covers every non-null row of its column."""
        for table in self.tables.values():
            for column, entries in table.indexes.items():
                col = table.column_position(column)
                expected = sorted((row[col], pos) for pos, row in enumerate(table.rows)
                                  if row[col] is not None)
                if entries != expected:
                    return False
        return True

    # -- execution -----------------------------------------------------------

    def execute(self, sql: str) -> EngineResult:
        stmt = parse_statement(sql)
        if isinstance(stmt, SelectStmt):
            return self._execute_select(stmt)
        if isinstance(stmt, InsertStmt):
            return self._execute_insert(stmt)
        if isinstance(stmt, TableSchema):
            self.create_table(stmt)
            return EngineResult(columns=["created"], rows=[{"created": stmt.table_name}])
        raise SqlSyntaxError(0, "unsupported statement")

    def _execute_insert(self, stmt: InsertStmt) -> EngineResult:
        table = self.table(stmt.table)
        names = table.schema.field_names()
        for values in stmt.rows:
            if stmt.columns is not None:
                for column in stmt.columns:
                    table.column_position(column)
                by_name = dict(zip(stmt.columns, values))
                if len(by_name) != len(values):
                    raise SqlSyntaxError(0, "duplicate column in INSERT")
                ordered = tuple(by_name.get(name) for name in names)
            else:
                ordered = values
            table.insert(ordered)
        return EngineResult(columns=["rows_affected"],
                            rows=[{"rows_affected": len(stmt.rows)}])

    def _execute_select(self, stmt: SelectStmt) -> EngineResult:
        table = self.table(stmt.table)
        stats = ResultStats()

        if stmt.join is None:
            source_rows, columns_of = self._scan_single(stmt, table, stats)
        else:
            source_rows, columns_of = self._scan_join(stmt, table, stats)

        projected = self._project(stmt, source_rows, columns_of, table.name)
        ordered = self._order(stmt, projected, source_rows, columns_of, table.name)
        if stmt.limit is not None:
            ordered = ordered[:stmt.limit]
        columns = projected["columns"]
        rows = [dict(zip(columns, row)) for row in ordered]
        return EngineResult(columns=columns, rows=rows, stats=stats)

    # -- scan layer --------------------------------------------------------------

    def _resolve(self, ref: ColumnRef, columns_of: dict, base_table: str | None = None) -> str:
        """Map a (possibly qualified) column ref to a key of the scan rows."""
        if ref.table is not None:
            key = f"{ref.table}.{ref.name}"
            if key in columns_of:
                return key
            if ref.table == base_table and ref.name in columns_of:
                return ref.name
            raise UnknownColumn(f"unknown column {key}")
        matches = [key for key in columns_of
                   if key == ref.name or key.endswith(f".{ref.name}")]
        if not matches:
            raise UnknownColumn(f"unknown column {ref.name}")
        return matches[0]

    def _condition_holds(self, condition: Condition, value, sql_type: str) -> bool:
        if condition.op == "IS_NULL":
            return value is None
        if condition.op == "IS_NOT_NULL":
            return value is not None
        if value is None or condition.value is None:
            return False
        literal = _coerce(condition.value, sql_type, condition.column.name)
        op = condition.op
        if op == "=":
            return value == literal
        if op == "!=":
            return value != literal
        if op == "<":
            return value < literal
        if op == "<=":
            return value <= literal
        if op == ">":
            return value > literal
        return value >= literal

    def _scan_single(self, stmt: SelectStmt, table: RelationalTable, stats: ResultStats):
        columns_of = {spec.name: spec for spec in table.schema.fields}
        conditions = []
        for condition in stmt.where:
            if condition.column.table not in (None, table.name):
                raise UnknownColumn(f"unknown table qualifier {condition.column.table}")
            table.column_position(condition.column.name)
            conditions.append(condition)

        indexed = next((c for c in conditions
                        if c.op == "=" and c.column.name in table.indexes
                        and c.value is not None), None)
        if indexed is not None:
            spec = table.schema.field_named(indexed.column.name)
            key = _coerce(indexed.value, spec.sql_type, spec.name)
            positions = table.index_lookup(indexed.column.name, key)
            candidates = [(pos, table.rows[pos]) for pos in positions]
            stats.rows_scanned = len(candidates)
            stats.used_index = indexed.column.name
            stats.elapsed_cost = costmodel.probe_cost(len(table.rows), len(candidates))
            conditions = [c for c in conditions if c is not indexed]
        else:
            candidates = list(enumerate(table.rows))
            stats.rows_scanned = len(table.rows)
            stats.elapsed_cost = costmodel.scan_cost(len(table.rows))

        # Rewrite rule: a LIMIT under a pure projection (no ordering, no
        # aggregation) lets the scan stop at the limit.
        early_stop = None
        if ("push_limit_through_projection" in self.enabled_rewrites
                and stmt.limit is not None and not stmt.order_by
                and not stmt.group_by
                and not any(p.kind == "aggregate" for p in stmt.projections)):
            early_stop = stmt.limit

        kept = []
        examined = 0
        for pos, row in candidates:
            examined += 1
            values = {spec.name: row[i] for i, spec in enumerate(table.schema.fields)}
            if all(self._condition_holds(c, values[c.column.name],
                                         table.schema.field_named(c.column.name).sql_type)
                   for c in conditions):
                kept.append(values)
                if early_stop is not None and len(kept) >= early_stop:
                    break
        if early_stop is not None and examined < len(candidates):
            stats.rows_scanned = examined
        stats.matched_rows = len(kept)
        return kept, columns_of

    def _scan_join(self, stmt: SelectStmt, left: RelationalTable, stats: ResultStats):
        right = self.table(stmt.join.table)
        columns_of = {}
        for spec in left.schema.fields:
            columns_of[f"{left.name}.{spec.name}"] = spec
        for spec in right.schema.fields:
            columns_of[f"{right.name}.{spec.name}"] = spec

        def side_of(ref: ColumnRef):
            if ref.table == left.name:
                return left, ref.name
            if ref.table == right.name:
                return right, ref.name
            if ref.table is None:
                in_left = any(s.name == ref.name for s in left.schema.fields)
                in_right = any(s.name == ref.name for s in right.schema.fields)
                if in_left and not in_right:
                    return left, ref.name
                if in_right and not in_left:
                    return right, ref.name
                raise UnknownColumn(f"ambiguous or unknown column {ref.name}")
            raise UnknownColumn(f"unknown table qualifier {ref.table}")

        left_side, left_col = side_of(stmt.join.left)
        right_side, right_col = side_of(stmt.join.right)
        if left_side is right_side:
            raise SqlSyntaxError(0, "join condition must reference both tables")
        if left_side is right:
            left_col, right_col = right_col, left_col

        lcol = left.column_position(left_col)
        rcol = right.column_position(right_col)
        stats.rows_scanned = len(left.rows)
        outer_cost = costmodel.scan_cost(len(left.rows))
        use_index = right_col in right.indexes

        joined = []
        probes = 0
        for lrow in left.rows:
            key = lrow[lcol]
            if key is None:
                continue
            if use_index:
                positions = right.index_lookup(right_col, key)
                matches = [right.rows[p] for p in positions]
            else:
                matches = [r for r in right.rows if r[rcol] == key]
            probes += len(matches) if use_index else len(right.rows)
            for rrow in matches:
                combined = {}
                for i, spec in enumerate(left.schema.fields):
                    combined[f"{left.name}.{spec.name}"] = lrow[i]
                for i, spec in enumerate(right.schema.fields):
                    combined[f"{right.name}.{spec.name}"] = rrow[i]
                joined.append(combined)
        stats.rows_scanned += probes
        if use_index:
            stats.used_index = right_col
            per_probe = costmodel.probe_cost(len(right.rows), 1)
        else:
            per_probe = costmodel.scan_cost(len(right.rows))
        stats.elapsed_cost = outer_cost + len(left.rows) * per_probe

        kept = []
        for values in joined:
            ok = True
            for condition in stmt.where:
                key = self._resolve(condition.column, columns_of)
                if not self._condition_holds(condition, values[key], columns_of[key].sql_type):
                    ok = False
                    break
            if ok:
                kept.append(values)
        stats.matched_rows = len(kept)
        return kept, columns_of

    # -- projection / aggregation ---------------------------------------------------

    def _project(self, stmt: SelectStmt, source_rows, columns_of, base_table):
        has_aggregate = any(p.kind == "aggregate" for p in stmt.projections)
        if not has_aggregate and not stmt.group_by:
            columns = []
            keys = []
            for projection in stmt.projections:
                if projection.kind == "star":
                    for key in columns_of:
                        columns.append(key)
                        keys.append(key)
                else:
                    keys.append(self._resolve(projection.column, columns_of, base_table))
                    columns.append(projection.output_name()
                                   if projection.alias else keys[-1])
            rows = [tuple(values[key] for key in keys) for values in source_rows]
            return {"columns": columns, "rows": rows, "aggregated": False}

        group_keys = [self._resolve(ref, columns_of, base_table) for ref in stmt.group_by]
        if stmt.group_by:
            groups: dict[tuple, list] = {}
            for values in source_rows:
                key = tuple(values[k] for k in group_keys)
                groups.setdefault(key, []).append(values)
        else:
            groups = {(): list(source_rows)}

        columns = [p.output_name() for p in stmt.projections]
        rows = []
        for key, members in groups.items():
            row = []
            for projection in stmt.projections:
                if projection.kind == "aggregate":
                    row.append(self._aggregate(projection, members, columns_of))
                elif projection.kind == "column":
                    resolved = self._resolve(projection.column, columns_of, base_table)
                    if resolved not in group_keys:
                        raise SqlSyntaxError(
                            0, f"column {resolved} must appear in GROUP BY")
                    row.append(members[0][resolved] if members else None)
                else:
                    raise SqlSyntaxError(0, "* cannot be combined with aggregates")
            rows.append(tuple(row))
        return {"columns": columns, "rows": rows, "aggregated": True}

    def _aggregate(self, projection: Projection, members, columns_of):
        if projection.func == "COUNT":
            if projection.column is None:
                return len(members)
            key = self._resolve(projection.column, columns_of)
            return sum(1 for m in members if m[key] is not None)
        key = self._resolve(projection.column, columns_of)
        values = [m[key] for m in members if m[key] is not None]
        if not values:
            return None
        if projection.func in ("SUM", "AVG"):
            if not all(isinstance(v, (int, Decimal)) and not isinstance(v, bool)
                       for v in values):
                raise TypeMismatch(f"{projection.func} requires a numeric column")
            if projection.func == "SUM":
                return sum(values)
            return Decimal(sum(values)) / Decimal(len(values))
        if projection.func == "MIN":
            return min(values)
        return max(values)

    def _order(self, stmt: SelectStmt, projected, source_rows, columns_of, base_table):
        rows = projected["rows"]
        if not stmt.order_by:
            return rows
        columns = projected["columns"]
        if projected["aggregated"]:
            lookup = {name: i for i, name in enumerate(columns)}
            def key_index(ref: ColumnRef):
                name = ref.text()
                if name in lookup:
                    return lookup[name]
                raise UnknownColumn(f"ORDER BY column {name} not in output")
            indexed = [(key_index(item.column), item.descending)
                       for item in stmt.order_by]
            decorated = list(rows)
            for idx, descending in reversed(indexed):
                decorated.sort(key=lambda r: _sort_key(r[idx]), reverse=descending)
            return decorated

        lookup = {name: i for i, name in enumerate(columns)}
        pairs = list(zip(rows, source_rows))
        for item in reversed(stmt.order_by):
            name = item.column.text()
            if name in lookup:
                idx = lookup[name]
                pairs.sort(key=lambda p: _sort_key(p[0][idx]), reverse=item.descending)
            else:
                resolved = self._resolve(item.column, columns_of, base_table)
                pairs.sort(key=lambda p: _sort_key(p[1][resolved]),
                           reverse=item.descending)
        return [row for row, _ in pairs]

    # -- ingest / export / snapshot ----------------------------------------------------

    def ingest(self, payload, target: str) -> int:
        from ..schema import infer_table_schema, normalize_identifier

        name = normalize_identifier(target)
        if isinstance(payload, list) and payload and all(isinstance(r, dict) for r in payload):
            records = payload
        elif isinstance(payload, list) and payload and all(isinstance(r, list) for r in payload):
            width = len(payload[0])
            if any(len(r) != width for r in payload):
                raise SchemaMismatch("positional rows have differing widths")
            if name in self.tables:
                names = self.tables[name].schema.field_names()
                if width != len(names):
                    raise SchemaMismatch(
                        f"{name} expects {len(names)} values per row, got {width}")
            else:
                names = [f"col_{i + 1}" for i in range(width)]
            records = [dict(zip(names, row)) for row in payload]
        elif isinstance(payload, dict):
            records = [payload]
        else:
            raise SchemaMismatch("relational ingest expects mappings or uniform rows")

        if name not in self.tables:
            self.create_table(infer_table_schema(records, name))
        table = self.tables[name]
        names = table.schema.field_names()
        for record in records:
            flat = {normalize_identifier(k): v for k, v in record.items()}
            unknown = set(flat) - set(names)
            if unknown:
                raise SchemaMismatch(f"unknown columns for {name}: {sorted(unknown)}")
            try:
                table.insert(tuple(flat.get(column) for column in names))
            except TypeMismatch as exc:
                raise SchemaMismatch(str(exc)) from exc
        return len(records)

    def record_count(self, target: str) -> int:
        return len(self.table(target).rows)

    def export_records(self, target: str):
        table = self.table(target)
        names = table.schema.field_names()
        out = []
        for row in table.rows:
            record = {}
            for name, value in zip(names, row):
                if isinstance(value, datetime.datetime):
                    record[name] = value.strftime("%Y-%m-%dT%H:%M:%S")
                elif isinstance(value, datetime.date):
                    record[name] = value.isoformat()
                else:
                    record[name] = value
            out.append(record)
        return out

    def dump_lines(self) -> list:
        lines = []
        for name in sorted(self.tables):
            table = self.tables[name]
            lines.append({"kind": "table", "ddl": emit_ddl(table.schema),
                          "indexes": sorted(table.indexes)})
            for record in self.export_records(name):
                lines.append({"kind": "row", "table": name, "values": record})
        return lines

    def load_lines(self, lines) -> None:
        self.tables = {}
        pending_indexes = []
        for line in lines:
            if line["kind"] == "table":
                schema = parse_ddl(line["ddl"])
                self.create_table(schema)
                pending_indexes.append((schema.table_name, line.get("indexes", [])))
            else:
                table = self.table(line["table"])
                names = table.schema.field_names()
                table.insert(tuple(line["values"].get(n) for n in names))
        for name, columns in pending_indexes:
            for column in columns:
                self.tables[name].build_index(column)

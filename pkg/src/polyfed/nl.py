"""Natural-language frontend: intents, prompts, translation, validation.

The grammar translator is the reference path and the whole test suite
runs on it; a remote-model client implements the same interface and can
be swapped in via config without touching the pipeline.
"""

import datetime
import json
import re
import threading
import urllib.request
from dataclasses import dataclass, field

from .catalog import Catalog
from .errors import (EmptyCatalog, NotTranslatable, RefinementExhausted, SessionBusy,
                     TranslatorTimeout, TranslatorUnavailable, UnknownSession,
                     UnrecognizedIntent)
from .ingest import StorageParadigm
from .schema import normalize_identifier, singularize

MAX_ATTEMPTS = 3
HISTORY_CAPACITY = 16
PROMPT_BUDGET = 8000

SYSTEM_INSTRUCTIONS = ("You translate questions into queries for the "
                       "schema below. Reply with one fenced code block.")

METRIC_SYNONYMS = {
    "sales": ("sales", "amount", "total", "price", "revenue"),
    "revenue": ("revenue", "amount", "total", "price", "sales"),
    "spend": ("spend", "spending", "amount", "total", "price"),
    "cost": ("cost", "price", "amount"),
}


@dataclass(frozen=True)
class NlRequest:
    session_id: str
    question: str

    def __post_init__(self):
        if not self.question.strip():
            raise UnrecognizedIntent("question is empty")


@dataclass
class Intent:
    kind: str          # select | aggregate_count | topk | graph_traverse | kv_lookup | vector_similar
    slots: dict


@dataclass
class PromptEnvelope:
    system_instructions: str
    schema_context: str
    history_digest: str
    question: str
    constraints: list = field(default_factory=list)

    def total_length(self) -> int:
        return (len(self.system_instructions) + len(self.schema_context)
                + len(self.history_digest) + len(self.question)
                + sum(len(c) for c in self.constraints))


@dataclass
class GeneratedQuery:
    dialect: str       # sql | graph | document | kv | vector
    text: str
    attempt: int = 1
    source: str = "grammar"


@dataclass
class ValidationReport:
    ok: bool
    mode: str
    missing_tables: set = field(default_factory=set)
    unknown_columns: set = field(default_factory=set)
    syntax_error: str | None = None

    def to_dict(self) -> dict:
        return {"ok": self.ok, "mode": self.mode,
                "missing_tables": sorted(self.missing_tables),
                "unknown_columns": sorted(self.unknown_columns),
                "syntax_error": self.syntax_error}


# --- intent grammar ------------------------------------------------------------

_FILTER_RE = re.compile(
    r"(?P<col>[A-Za-z_][A-Za-z0-9_]*)\s*(?P<op>>=|<=|!=|=|>|<|\bis\b)\s*"
    r"(?P<val>'[^']*'|\"[^\"]*\"|[^\s]+)", re.IGNORECASE)

_TIME_PHRASES = ("last month", "this month", "last week", "today")

_TOPK_RE = re.compile(
    r"\btop\s+(?P<n>\d+)\s+(?P<entity>[A-Za-z_][A-Za-z0-9_]*)\s+by\s+"
    r"(?P<metric>[A-Za-z_][A-Za-z0-9_]*)", re.IGNORECASE)
_COUNT_RE = re.compile(r"^\s*how\s+many\s+(?P<entity>[A-Za-z_][A-Za-z0-9_]*)", re.IGNORECASE)
_SELECT_RE = re.compile(
    r"^\s*(?:show|list|what)\s+(?:me\s+|all\s+|the\s+|are\s+the\s+)*"
    r"(?P<entity>[A-Za-z_][A-Za-z0-9_]*)", re.IGNORECASE)
_GRAPH_COMPOSITE_RE = re.compile(
    r"^\s*(?:names\s+of\s+)?(?P<rel>friends|connections)\s+of\s+"
    r"(?P<entity>[A-Za-z_][A-Za-z0-9_]*)\s+who\s+(?P<verb>bought|purchased|ordered)\s+"
    r"(?P<value>.+?)\??\s*$", re.IGNORECASE)
_GRAPH_RE = re.compile(
    r"^\s*(?P<rel>friends|connections)\s+of\s+(?P<name>[A-Za-z][A-Za-z0-9_-]*)\s*\??\s*$",
    re.IGNORECASE)
_KV_RE = re.compile(r"^\s*(?:value\s+of|get)\s+(?P<key>\S+?)\??\s*$", re.IGNORECASE)
_VECTOR_RE = re.compile(
    r"^\s*similar\s+to\s+(?P<anchor>\S+?)(?:\s+top\s+(?P<k>\d+))?\??\s*$", re.IGNORECASE)

_FOLLOW_UP_RE = re.compile(
    r"^\s*(?:and\s+(?:for\s+)?(?P<v1>[A-Za-z0-9_-]+)\s+only|"
    r"what\s+about\s+(?P<v2>[A-Za-z0-9_-]+))\s*\??\s*$", re.IGNORECASE)


def _parse_filters(question: str) -> list:
    clause = re.search(r"\bwhere\b(.*)$", question, re.IGNORECASE)
    if not clause:
        return []
    filters = []
    for part in re.split(r"\s+and\s+", clause.group(1).strip(), flags=re.IGNORECASE):
        match = _FILTER_RE.search(part)
        if not match:
            continue
        op = match.group("op").lower()
        if op == "is":
            op = "="
        value = match.group("val").strip("?").strip("'\"")
        filters.append((match.group("col").lower(), op, value))
    return filters


def _parse_time_range(question: str):
    lowered = question.lower()
    for phrase in _TIME_PHRASES:
        if phrase in lowered:
            return phrase.replace(" ", "_")
    return None


def parse_intent(question: str) -> Intent:
    """Deterministic pattern grammar over the question text."""
    text = question.strip()
    if (match := _TOPK_RE.search(text)):
        slots = {"n": int(match.group("n")),
                 "entity": match.group("entity").lower(),
                 "metric": match.group("metric").lower(),
                 "filters": _parse_filters(text),
                 "time_range": _parse_time_range(text)}
        return Intent("topk", slots)
    if (match := _COUNT_RE.match(text)):
        return Intent("aggregate_count", {"entity": match.group("entity").lower(),
                                          "filters": _parse_filters(text),
                                          "time_range": _parse_time_range(text)})
    if (match := _GRAPH_COMPOSITE_RE.match(text)):
        relation = singularize(match.group("rel").lower()).upper()
        return Intent("graph_traverse", {"entity": match.group("entity").lower(),
                                         "relation": relation,
                                         "action_verb": match.group("verb").lower(),
                                         "action_value": match.group("value").strip()})
    if (match := _GRAPH_RE.match(text)):
        relation = match.group("rel").lower()
        return Intent("graph_traverse", {"anchor_node": match.group("name"),
                                         "relation": singularize(relation).upper()})
    if (match := _KV_RE.match(text)):
        return Intent("kv_lookup", {"key": match.group("key")})
    if (match := _VECTOR_RE.match(text)):
        k = int(match.group("k")) if match.group("k") else 5
        return Intent("vector_similar", {"anchor": match.group("anchor"), "k": k})
    if (match := _SELECT_RE.match(text)):
        return Intent("select", {"entity": match.group("entity").lower(),
                                 "filters": _parse_filters(text),
                                 "time_range": _parse_time_range(text)})
    raise UnrecognizedIntent(f"no grammar pattern matches {question!r}")


def parse_follow_up(question: str):
    """The raw filter value of a follow-up question, or None."""
    match = _FOLLOW_UP_RE.match(question)
    if not match:
        return None
    return match.group("v1") or match.group("v2")


def merge_follow_up(previous: Intent, column: str, value: str) -> Intent:
    slots = dict(previous.slots)
    filters = list(slots.get("filters") or [])
    filters.append((column, "=", value))
    slots["filters"] = filters
    return Intent(previous.kind, slots)


# --- schema context ----------------------------------------------------------------

def _stems(intent: Intent) -> set:
    stems = set()
    for key in ("entity", "metric"):
        value = intent.slots.get(key)
        if value:
            stems.add(singularize(normalize_identifier(str(value))))
    for column, _, _ in intent.slots.get("filters") or []:
        stems.add(singularize(normalize_identifier(column)))
    return stems


def _table_matches(schema, stems: set) -> bool:
    if singularize(schema.table_name) in stems:
        return True
    return any(singularize(spec.name) in stems for spec in schema.fields)


def retrieve_schema_context(intent, catalog: Catalog, budget: int = PROMPT_BUDGET) -> str:
    """DDL of tables stem-matching the intent; trimmed to the budget.

    Non-matching tables are dropped first, then FK neighbors of matches;
    matched tables always stay.
    """
    if catalog.is_empty():
        raise EmptyCatalog("no schemas or collections registered")
    schemas = [catalog.schemas[name] for name in catalog.table_names()]
    if not schemas:
        return ""
    stems = _stems(intent) if intent is not None else set()
    matched = [s for s in schemas if _table_matches(s, stems)]
    if not matched:
        matched = list(schemas)
    matched_names = {s.table_name for s in matched}
    neighbors = []
    for schema in matched:
        for fk in schema.foreign_keys:
            if fk.target_table not in matched_names:
                target = catalog.schema(fk.target_table)
                if target is not None and target not in neighbors:
                    neighbors.append(target)
    rest = [s for s in schemas
            if s.table_name not in matched_names and s not in neighbors]

    def render(groups):
        parts = []
        for group in groups:
            parts.extend(catalog.ddl(s.table_name) for s in group)
        return "\n\n".join(parts)

    for groups in ([matched, neighbors, rest], [matched, neighbors], [matched]):
        text = render(groups)
        if len(text) <= budget:
            return text
    return render([matched])


def compose_envelope(question: str, schema_context: str, history_digest: str = "",
                     budget: int = PROMPT_BUDGET) -> PromptEnvelope:
    envelope = PromptEnvelope(SYSTEM_INSTRUCTIONS, schema_context, history_digest, question)
    if envelope.total_length() > budget:
        envelope.history_digest = ""
    if envelope.total_length() > budget:
        keep = budget - (envelope.total_length() - len(envelope.schema_context))
        envelope.schema_context = envelope.schema_context[:max(keep, 0)]
    return envelope


# --- time ranges -----------------------------------------------------------------

def resolve_time_range(name: str, today: datetime.date):
    """(first day, last day) both inclusive for a relative time phrase."""
    if name == "last_month":
        first_this = today.replace(day=1)
        last_prev = first_this - datetime.timedelta(days=1)
        return last_prev.replace(day=1), last_prev
    if name == "this_month":
        first = today.replace(day=1)
        next_first = (first + datetime.timedelta(days=32)).replace(day=1)
        return first, next_first - datetime.timedelta(days=1)
    if name == "last_week":
        monday_this = today - datetime.timedelta(days=today.weekday())
        return monday_this - datetime.timedelta(days=7), monday_this - datetime.timedelta(days=1)
    if name == "today":
        return today, today
    raise NotTranslatable(f"unsupported time phrase {name!r}")


# --- translators ---------------------------------------------------------------------

class GrammarTranslator:
    """Deterministic template translator; needs no network and no model."""

    def __init__(self, catalog: Catalog, clock=datetime.date.today):
        self.catalog = catalog
        self.clock = clock

    def resolve_entity(self, entity: str):
        """(table, entity column or None); table-name match wins."""
        stem = singularize(normalize_identifier(entity))
        for name in self.catalog.table_names():
            if singularize(name) == stem or name == stem:
                return self.catalog.schemas[name], None
        for name in self.catalog.table_names():
            schema = self.catalog.schemas[name]
            for spec in schema.fields:
                if singularize(spec.name) == stem:
                    return schema, spec.name
        raise NotTranslatable(f"cannot resolve entity {entity!r} in the catalog")

    def resolve_metric(self, metric: str, schema):
        names = schema.field_names()
        stem = singularize(normalize_identifier(metric))
        if metric in names:
            return metric
        for name in names:
            if singularize(name) == stem:
                return name
        for candidate in METRIC_SYNONYMS.get(metric, ()):
            if candidate in names:
                return candidate
        raise NotTranslatable(f"cannot resolve metric {metric!r} on {schema.table_name}")

    def _render_value(self, schema, column: str, value: str) -> str:
        spec = schema.field_named(column)
        if spec is not None and spec.sql_type in ("INTEGER",) and re.match(r"^-?\d+$", value):
            return value
        if spec is not None and spec.sql_type.startswith("DECIMAL") \
                and re.match(r"^-?\d+(\.\d+)?$", value):
            return value
        if re.match(r"^-?\d+(\.\d+)?$", value) and spec is None:
            return value
        escaped = value.replace("'", "''")
        return f"'{escaped}'"

    def _where_clause(self, intent: Intent, schema) -> str:
        conjuncts = []
        for column, op, value in intent.slots.get("filters") or []:
            if schema.field_named(column) is None:
                raise NotTranslatable(f"filter column {column!r} not on {schema.table_name}")
            conjuncts.append(f"{column} {op} {self._render_value(schema, column, value)}")
        time_range = intent.slots.get("time_range")
        if time_range:
            date_column = next((s.name for s in schema.fields if s.sql_type == "DATE"), None)
            if date_column is None:
                raise NotTranslatable(f"{schema.table_name} has no DATE column for {time_range}")
            first, last = resolve_time_range(time_range, self.clock())
            conjuncts.append(f"{date_column} >= '{first.isoformat()}'")
            conjuncts.append(f"{date_column} <= '{last.isoformat()}'")
        return " WHERE " + " AND ".join(conjuncts) if conjuncts else ""

    def translate(self, envelope: PromptEnvelope, intent, attempt: int = 1) -> GeneratedQuery:
        if intent is None:
            raise NotTranslatable("no intent and no remote translator configured")
        kind = intent.kind
        if kind == "topk":
            schema, entity_col = self.resolve_entity(intent.slots["entity"])
            if entity_col is None:
                entity_col = schema.primary_key or schema.fields[0].name
            metric_col = self.resolve_metric(intent.slots["metric"], schema)
            metric_alias = normalize_identifier(intent.slots["metric"])
            sql = (f"SELECT {entity_col}, SUM({metric_col}) AS {metric_alias} "
                   f"FROM {schema.table_name}{self._where_clause(intent, schema)} "
                   f"GROUP BY {entity_col} ORDER BY {metric_alias} DESC "
                   f"LIMIT {intent.slots['n']}")
            return GeneratedQuery("sql", sql, attempt, "grammar")
        if kind == "aggregate_count":
            schema, _ = self.resolve_entity(intent.slots["entity"])
            sql = (f"SELECT COUNT(*) AS n FROM {schema.table_name}"
                   f"{self._where_clause(intent, schema)}")
            return GeneratedQuery("sql", sql, attempt, "grammar")
        if kind == "select":
            schema, _ = self.resolve_entity(intent.slots["entity"])
            sql = f"SELECT * FROM {schema.table_name}{self._where_clause(intent, schema)}"
            return GeneratedQuery("sql", sql, attempt, "grammar")
        if kind == "graph_traverse":
            anchor = intent.slots["anchor_node"].replace("'", "''")
            relation = intent.slots.get("relation", "FRIEND")
            pattern = (f"MATCH (u:User {{name:'{anchor}'}})-[:{relation}]->(f) "
                       f"RETURN f.name")
            return GeneratedQuery("graph", pattern, attempt, "grammar")
        if kind == "kv_lookup":
            return GeneratedQuery("kv", f"GET {intent.slots['key']}", attempt, "grammar")
        if kind == "vector_similar":
            text = f"SIMILAR TO {intent.slots['anchor']} TOP {intent.slots['k']}"
            return GeneratedQuery("vector", text, attempt, "grammar")
        raise NotTranslatable(f"unsupported intent kind {kind!r}")


_FENCE_RE = re.compile(r"```(?P<lang>[a-zA-Z]*)\n(?P<body>.*?)```", re.DOTALL)


class LlmTranslator:
    """Remote-model client speaking a chat-completion style protocol."""

    def __init__(self, endpoint: str, model: str, api_key: str = "",
                 timeout_ms: int = 30000):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout_ms = timeout_ms

    def _messages(self, envelope: PromptEnvelope) -> list:
        user = envelope.question
        if envelope.constraints:
            user += "\n\nConstraints:\n" + "\n".join(envelope.constraints)
        system = (f"{envelope.system_instructions}\n\nSchema:\n{envelope.schema_context}"
                  + (f"\n\nHistory:\n{envelope.history_digest}"
                     if envelope.history_digest else ""))
        return [{"role": "system", "content": system},
                {"role": "user", "content": user}]

    def translate(self, envelope: PromptEnvelope, intent, attempt: int = 1) -> GeneratedQuery:
        body = json.dumps({"model": self.model,
                           "messages": self._messages(envelope)}).encode("utf-8")
        request = urllib.request.Request(
            self.endpoint, data=body, method="POST",
            headers={"Content-Type": "application/json",
                     **({"Authorization": f"Bearer {self.api_key}"} if self.api_key else {})})
        try:
            with urllib.request.urlopen(request, timeout=self.timeout_ms / 1000) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except TimeoutError as exc:
            raise TranslatorTimeout(str(exc)) from exc
        except OSError as exc:
            raise TranslatorUnavailable(str(exc)) from exc
        content = _completion_text(payload)
        match = _FENCE_RE.search(content)
        if not match:
            raise NotTranslatable("model reply contains no fenced code block")
        lang = match.group("lang").lower()
        dialect = {"sql": "sql", "cypher": "graph", "graph": "graph",
                   "json": "document", "kv": "kv", "vector": "vector"}.get(lang)
        if dialect is None:
            dialect = _dialect_for_intent(intent)
        return GeneratedQuery(dialect, match.group("body").strip(), attempt, "llm")


def _completion_text(payload: dict) -> str:
    choices = payload.get("choices")
    if isinstance(choices, list) and choices:
        first = choices[0]
        message = first.get("message")
        if isinstance(message, dict) and "content" in message:
            return str(message["content"])
        if "text" in first:
            return str(first["text"])
    for key in ("completion", "content", "text"):
        if key in payload:
            return str(payload[key])
    raise NotTranslatable("model response carries no completion text")


def _dialect_for_intent(intent) -> str:
    if intent is None:
        return "sql"
    return {"graph_traverse": "graph", "kv_lookup": "kv",
            "vector_similar": "vector"}.get(intent.kind, "sql")


# --- validation -------------------------------------------------------------------------

def validate_query(query: GeneratedQuery, schema_tables, mode: str,
                   catalog: Catalog | None = None) -> ValidationReport:
    """Paper mode is the verbatim substring check (every listed table must
    appear in the query text); strict mode parses and resolves names."""
    if mode == "paper":
        missing = {t for t in schema_tables if t not in query.text}
        return ValidationReport(ok=not missing, mode="paper", missing_tables=missing)
    return _validate_strict(query, catalog)


def _validate_strict(query: GeneratedQuery, catalog: Catalog | None) -> ValidationReport:
    report = ValidationReport(ok=True, mode="strict")
    if catalog is None:
        report.ok = False
        report.syntax_error = "strict validation requires a catalog"
        return report
    if query.dialect == "sql":
        _validate_sql(query.text, catalog, report)
    elif query.dialect == "graph":
        from .engines.graph import _PATTERN_RE
        if not _PATTERN_RE.match(query.text):
            report.ok = False
            report.syntax_error = "unsupported graph pattern"
    elif query.dialect == "document":
        collection, _, filter_text = query.text.partition(":")
        if catalog.paradigm_of(collection.strip()) is not StorageParadigm.DOCUMENT:
            report.ok = False
            report.missing_tables.add(collection.strip())
        if filter_text.strip():
            from .engines.document import parse_filter
            try:
                parse_filter(filter_text)
            except Exception as exc:
                report.ok = False
                report.syntax_error = str(exc)
    elif query.dialect == "kv":
        if not re.match(r"^\s*GET\s+\S+\s*$", query.text, re.IGNORECASE):
            report.ok = False
            report.syntax_error = "unsupported kv query"
    elif query.dialect == "vector":
        from .engines.vector import _NEAREST_RE, _SIMILAR_RE
        if not (_SIMILAR_RE.match(query.text) or _NEAREST_RE.match(query.text)):
            report.ok = False
            report.syntax_error = "unsupported vector query"
    else:
        report.ok = False
        report.syntax_error = f"unknown dialect {query.dialect!r}"
    return report


def _validate_sql(sql: str, catalog: Catalog, report: ValidationReport) -> None:
    from .engines.relational import InsertStmt, parse_statement
    from .schema import TableSchema

    try:
        stmt = parse_statement(sql)
    except Exception as exc:
        report.ok = False
        report.syntax_error = str(exc)
        return
    if isinstance(stmt, TableSchema):
        return
    if isinstance(stmt, InsertStmt):
        if catalog.schema(stmt.table) is None:
            report.ok = False
            report.missing_tables.add(stmt.table)
        return

    tables = [stmt.table] + ([stmt.join.table] if stmt.join else [])
    known_columns: set[str] = set()
    qualified: set[str] = set()
    for name in tables:
        schema = catalog.schema(name)
        if schema is None:
            report.ok = False
            report.missing_tables.add(name)
            continue
        for spec in schema.fields:
            known_columns.add(spec.name)
            qualified.add(f"{name}.{spec.name}")
    aliases = {p.alias for p in stmt.projections if p.alias}

    def check(ref):
        if ref is None:
            return
        text = ref.text()
        if text in aliases or ref.name in aliases:
            return
        if ref.table is not None:
            if text not in qualified:
                report.ok = False
                report.unknown_columns.add(text)
        elif ref.name not in known_columns:
            report.ok = False
            report.unknown_columns.add(ref.name)

    for projection in stmt.projections:
        if projection.kind != "star":
            check(projection.column)
    if stmt.join:
        check(stmt.join.left)
        check(stmt.join.right)
    for condition in stmt.where:
        check(condition.column)
    for ref in stmt.group_by:
        check(ref)
    for item in stmt.order_by:
        check(item.column)


# --- refinement ------------------------------------------------------------------------

def constraints_from_report(report: ValidationReport, catalog: Catalog | None) -> list:
    lines = []
    for table in sorted(report.missing_tables):
        lines.append(f"You must reference table {table}.")
    for column in sorted(report.unknown_columns):
        valid = ""
        if catalog is not None:
            names = sorted({spec.name for schema in catalog.schemas.values()
                            for spec in schema.fields})
            valid = f"; valid columns: {', '.join(names)}"
        lines.append(f"Column {column} does not exist{valid}.")
    if report.syntax_error:
        lines.append(f"The previous query was malformed: {report.syntax_error}.")
    return lines


def refine(query: GeneratedQuery, report: ValidationReport, envelope: PromptEnvelope,
           attempt: int, translator, intent, catalog: Catalog | None = None,
           max_attempts: int = MAX_ATTEMPTS) -> GeneratedQuery:
    """Append constraint feedback and re-translate, or give up at the bound."""
    if attempt >= max_attempts:
        raise RefinementExhausted(report)
    envelope.constraints.extend(constraints_from_report(report, catalog))
    return translator.translate(envelope, intent, attempt=attempt + 1)


# --- result summary -----------------------------------------------------------------------

def _format_value(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, datetime.datetime):
        return value.strftime("%Y-%m-%dT%H:%M:%S")
    if isinstance(value, datetime.date):
        return value.isoformat()
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def summarize_result(result, mode: str = "template", llm_client=None) -> str:
    if mode == "llm" and llm_client is not None:
        try:
            envelope = PromptEnvelope(
                "Summarize this result table in one sentence.", "", "",
                str([dict(row) for row in result.rows[:5]]))
            return llm_client.translate(envelope, None).text
        except Exception:
            pass
    if not result.rows:
        return "No rows matched."
    first = result.rows[0]
    rendered = ", ".join(f"{c}={_format_value(first.get(c))}" for c in result.columns)
    return f"{len(result.rows)} row(s). Top: {rendered}"


# --- sessions -----------------------------------------------------------------------------

@dataclass
class Turn:
    question: str
    intent: Intent | None
    query: GeneratedQuery
    digest: str


@dataclass
class SessionContext:
    session_id: str
    turns: list = field(default_factory=list)
    active_tables: set = field(default_factory=set)
    capacity: int = HISTORY_CAPACITY

    def append(self, turn: Turn) -> None:
        self.turns.append(turn)
        while len(self.turns) > self.capacity:
            self.turns.pop(0)

    def last_intent(self):
        for turn in reversed(self.turns):
            if turn.intent is not None:
                return turn.intent
        return None

    def history_digest(self, limit: int = 3) -> str:
        parts = []
        for turn in self.turns[-limit:]:
            parts.append(f"Q: {turn.question} -> {turn.query.dialect}: {turn.query.text}")
        return "\n".join(parts)


class SessionStore:
    """Single-owner sessions: one in-flight request per session_id."""

    def __init__(self, capacity: int = HISTORY_CAPACITY):
        self._sessions: dict[str, SessionContext] = {}
        self._busy: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self.capacity = capacity

    def create(self, session_id: str) -> SessionContext:
        with self._guard:
            if session_id not in self._sessions:
                self._sessions[session_id] = SessionContext(session_id, capacity=self.capacity)
                self._busy[session_id] = threading.Lock()
            return self._sessions[session_id]

    def get(self, session_id: str) -> SessionContext:
        with self._guard:
            if session_id not in self._sessions:
                raise UnknownSession(f"no session {session_id!r}")
            return self._sessions[session_id]

    def get_or_create(self, session_id: str) -> SessionContext:
        return self.create(session_id)

    def acquire(self, session_id: str):
        lock = self._busy[session_id]
        if not lock.acquire(blocking=False):
            raise SessionBusy(f"session {session_id!r} has a request in flight")
        return lock

    def update_session(self, session_id: str, turn: Turn) -> SessionContext:
        ctx = self.get(session_id)
        ctx.append(turn)
        return ctx

"""Exception vocabulary shared across all polyfed components.

Every error a caller can observe is one of these classes; the HTTP layer
maps them onto its documented status codes via `code`.
"""


class PolyfedError(Exception):
    """Base class; `code` is the stable machine-readable identifier."""

    code = "INTERNAL"

    def __init__(self, message: str = "", **detail):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.detail = detail


# --- ingest ---------------------------------------------------------------

class MalformedSource(PolyfedError):
    code = "MALFORMED_SOURCE"

    def __init__(self, line: int, column: int, message: str = ""):
        super().__init__(message or f"parse failure at line {line}, column {column}",
                         line=line, column=column)
        self.line = line
        self.column = column


class EncodingError(PolyfedError):
    code = "ENCODING_ERROR"


class NoEngineRegistered(PolyfedError):
    code = "NO_ENGINE_REGISTERED"

    def __init__(self, paradigm):
        super().__init__(f"no engine registered for paradigm {paradigm}", paradigm=str(paradigm))
        self.paradigm = paradigm


# --- schema inference -----------------------------------------------------

class EmptySample(PolyfedError):
    code = "EMPTY_SAMPLE"


class IdentifierCollision(PolyfedError):
    code = "IDENTIFIER_COLLISION"


# --- natural-language frontend ---------------------------------------------

class UnrecognizedIntent(PolyfedError):
    code = "UNRECOGNIZED_INTENT"


class EmptyCatalog(PolyfedError):
    code = "EMPTY_CATALOG"


class NotTranslatable(PolyfedError):
    code = "NOT_TRANSLATABLE"


class TranslatorTimeout(PolyfedError):
    code = "TRANSLATOR_TIMEOUT"


class TranslatorUnavailable(PolyfedError):
    code = "TRANSLATOR_UNAVAILABLE"


class RefinementExhausted(PolyfedError):
    code = "REFINEMENT_EXHAUSTED"

    def __init__(self, report):
        super().__init__("query failed validation at the attempt bound")
        self.report = report


class UnknownSession(PolyfedError):
    code = "UNKNOWN_SESSION"


class SessionBusy(PolyfedError):
    code = "SESSION_BUSY"


# --- engines ----------------------------------------------------------------

class SqlSyntaxError(PolyfedError):
    code = "SQL_SYNTAX_ERROR"

    def __init__(self, position: int, message: str = ""):
        super().__init__(message or f"SQL syntax error at position {position}", position=position)
        self.position = position


class UnknownTable(PolyfedError):
    code = "UNKNOWN_TABLE"


class UnknownColumn(PolyfedError):
    code = "UNKNOWN_COLUMN"


class TypeMismatch(PolyfedError):
    code = "TYPE_MISMATCH"


class DuplicateIndex(PolyfedError):
    code = "DUPLICATE_INDEX"


class NoSuchIndex(PolyfedError):
    code = "NO_SUCH_INDEX"


class FilterSyntaxError(PolyfedError):
    code = "FILTER_SYNTAX_ERROR"


class UnknownCollection(PolyfedError):
    code = "UNKNOWN_COLLECTION"


class PatternSyntaxError(PolyfedError):
    code = "PATTERN_SYNTAX_ERROR"


class NotFound(PolyfedError):
    code = "NOT_FOUND"


class DimensionMismatch(PolyfedError):
    code = "DIMENSION_MISMATCH"


class SchemaMismatch(PolyfedError):
    code = "SCHEMA_MISMATCH"


class PayloadShapeError(PolyfedError):
    code = "PAYLOAD_SHAPE_ERROR"


# --- federation ---------------------------------------------------------------

class PlanFormatError(PolyfedError):
    code = "BAD_PLAN"


class UnknownSubqueryType(PolyfedError):
    code = "UNKNOWN_SUBQUERY_TYPE"


class UnjoinableFragments(PolyfedError):
    code = "UNJOINABLE_FRAGMENTS"


class ColumnMismatch(PolyfedError):
    code = "COLUMN_MISMATCH"


class MissingJoinKey(PolyfedError):
    code = "MISSING_JOIN_KEY"


class PlanError(PolyfedError):
    """Wraps the first failing plan node; carries its index."""

    code = "PLAN_NODE_ERROR"

    def __init__(self, node_index: int, cause: Exception):
        super().__init__(f"plan node {node_index} failed: {cause}", node_index=node_index)
        self.node_index = node_index
        self.cause = cause


class PlanTimeout(PolyfedError):
    code = "PLAN_TIMEOUT"


# --- tuner ---------------------------------------------------------------------

class InvalidAction(PolyfedError):
    code = "INVALID_ACTION"


# --- persistence ------------------------------------------------------------------

class ChecksumMismatch(PolyfedError):
    code = "CHECKSUM_MISMATCH"


class IncompatibleFormatVersion(PolyfedError):
    code = "INCOMPATIBLE_FORMAT_VERSION"

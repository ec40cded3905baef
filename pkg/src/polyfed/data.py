"""Ingestable value model and source parsing.

A data value is a plain Python tree: None, bool, int, decimal.Decimal,
str, list, or dict with str keys.  Decimals are exact base-10 so source
digits survive (149.99 never becomes a binary float).
"""

import csv
import io
import json
import re
from decimal import Decimal, InvalidOperation

import yaml

from .errors import EncodingError, MalformedSource

SCALAR_TYPES = (type(None), bool, int, Decimal, str)

INT_RE = re.compile(r"^-?\d+$")
DECIMAL_RE = re.compile(r"^-?\d+\.\d+$")
DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
TIMESTAMP_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z?$")


def is_scalar(value) -> bool:
    return isinstance(value, SCALAR_TYPES)


def type_csv_cell(cell: str):
    """Lexical typing for header-CSV cells: integer, decimal, else text.

    ISO dates stay text; schema inference recognizes the shape later.
    """
    if INT_RE.match(cell):
        return int(cell)
    if DECIMAL_RE.match(cell):
        return Decimal(cell)
    return cell


# --- parsing ----------------------------------------------------------------

def _decode(data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"input is not valid UTF-8: {exc}") from exc


def _parse_json(text: str):
    def reject_constant(name):
        raise ValueError(f"non-finite constant {name} not supported")

    try:
        return json.loads(text, parse_float=Decimal, parse_constant=reject_constant)
    except json.JSONDecodeError as exc:
        raise MalformedSource(exc.lineno, exc.colno, exc.msg) from exc
    except ValueError as exc:
        raise MalformedSource(1, 1, str(exc)) from exc


class _DecimalSafeLoader(yaml.SafeLoader):
    """SafeLoader variant that keeps float-looking scalars as exact decimals."""


def _construct_decimal(loader, node):
    raw = loader.construct_scalar(node).replace("_", "")
    try:
        return Decimal(raw)
    except InvalidOperation as exc:
        raise yaml.constructor.ConstructorError(
            None, None, f"unsupported numeric scalar {raw!r}", node.start_mark) from exc


_DecimalSafeLoader.add_constructor("tag:yaml.org,2002:float", _construct_decimal)


def _parse_yaml(text: str):
    try:
        return yaml.load(text, Loader=_DecimalSafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark else 1
        column = mark.column + 1 if mark else 1
        raise MalformedSource(line, column, str(exc)) from exc


def _parse_csv(text: str, header: bool):
    reader = csv.reader(io.StringIO(text))
    try:
        rows = [row for row in reader if row]
    except csv.Error as exc:
        raise MalformedSource(reader.line_num, 1, str(exc)) from exc
    if not header:
        return [list(row) for row in rows]
    if not rows:
        return []
    names = rows[0]
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(names):
            raise MalformedSource(lineno, 1, "row width differs from header")
        records.append({name: type_csv_cell(cell) for name, cell in zip(names, row)})
    return records


def parse_source(data: bytes, format: str, csv_header: bool = False):
    """Parse raw bytes in the given format (csv, json, yaml) into a value tree."""
    text = _decode(data)
    if format == "json":
        return _parse_json(text)
    if format == "yaml":
        return _parse_yaml(text)
    if format == "csv":
        return _parse_csv(text, csv_header)
    raise ValueError(f"unsupported format {format!r}")


# --- canonical JSON ----------------------------------------------------------

def _json_atom(value) -> str:
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Decimal):
        return format(value, "f")
    if isinstance(value, float):
        return json.dumps(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    raise TypeError(f"not a scalar: {value!r}")


def dump_json(value, pretty: bool = False) -> str:
    """Serialize a value tree to JSON with decimals rendered digit-exact.

    Pretty form uses 2-space indentation; compact form has no whitespace.
    Mapping key order is preserved as-is so output is byte stable.
    """
    def emit(node, depth):
        if isinstance(node, dict):
            if not node:
                return "{}"
            items = [(json.dumps(str(k), ensure_ascii=False), emit(v, depth + 1))
                     for k, v in node.items()]
            if pretty:
                pad = "  " * (depth + 1)
                body = ",\n".join(f"{pad}{k}: {v}" for k, v in items)
                return "{\n" + body + "\n" + "  " * depth + "}"
            return "{" + ",".join(f"{k}:{v}" for k, v in items) + "}"
        if isinstance(node, (list, tuple)):
            if not node:
                return "[]"
            parts = [emit(v, depth + 1) for v in node]
            if pretty:
                pad = "  " * (depth + 1)
                return "[\n" + ",\n".join(pad + p for p in parts) + "\n" + "  " * depth + "]"
            return "[" + ",".join(parts) + "]"
        return _json_atom(node)

    return emit(value, 0)

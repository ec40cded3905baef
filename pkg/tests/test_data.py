from decimal import Decimal

import pytest

from polyfed.data import dump_json, parse_source
from polyfed.errors import EncodingError, MalformedSource


def test_json_mapping_with_empty_sequence():
    value = parse_source(b'{"nodes": []}', "json")
    assert value == {"nodes": []}


def test_headerless_csv_keeps_raw_text():
    value = parse_source(b"a,b\n1,2", "csv", csv_header=False)
    assert value == [["a", "b"], ["1", "2"]]


def test_header_csv_types_cells_lexically():
    value = parse_source(b"id,price,name,day\n1,149.99,Cup,2024-01-11", "csv",
                         csv_header=True)
    assert value == [{"id": 1, "price": Decimal("149.99"),
                      "name": "Cup", "day": "2024-01-11"}]
    assert isinstance(value[0]["price"], Decimal)


def test_unclosed_brace_reports_position():
    with pytest.raises(MalformedSource) as err:
        parse_source(b"{", "json")
    assert (err.value.line, err.value.column) == (1, 2)


def test_invalid_utf8_is_an_encoding_error():
    with pytest.raises(EncodingError):
        parse_source(b"\xff\xfe{}", "json")


def test_json_decimals_preserve_digits():
    value = parse_source(b'{"price": 149.99, "exact": 0.30}', "json")
    assert value["price"] == Decimal("149.99")
    assert str(value["exact"]) == "0.30"


def test_yaml_subset_with_decimals():
    text = b"items:\n  - name: cup\n    price: 10.50\nflag: true\n"
    value = parse_source(text, "yaml")
    assert value["items"][0]["price"] == Decimal("10.50")
    assert value["flag"] is True


def test_yaml_error_carries_position():
    with pytest.raises(MalformedSource):
        parse_source(b"a: [1, 2", "yaml")


def test_csv_quoting_rfc4180():
    value = parse_source(b'name,note\n"Smith, Jo","says ""hi"""\n', "csv",
                         csv_header=True)
    assert value == [{"name": "Smith, Jo", "note": 'says "hi"'}]


def test_dump_json_pretty_and_compact():
    tree = {"a": Decimal("1.50"), "b": [1, None, True], "c": {}}
    assert dump_json(tree, pretty=False) == '{"a":1.50,"b":[1,null,true],"c":{}}'
    pretty = dump_json(tree, pretty=True)
    assert '"a": 1.50' in pretty and pretty.startswith("{\n")


def test_dump_then_parse_round_trips_decimals():
    tree = {"x": Decimal("10.230"), "n": 7}
    again = parse_source(dump_json(tree).encode(), "json")
    assert str(again["x"]) == "10.230"
    assert again["n"] == 7

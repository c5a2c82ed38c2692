import json

import numpy as np
import pytest

from unitarize import io
from unitarize.errors import ValidationError

WRITERS = {
    "body": lambda doc: io.body_to_doc(io.body_from_doc(doc)),
    "banach_bundle": lambda doc: io.family_to_doc(io.bundle_from_doc(doc).family),
    "stratified_cstar": lambda doc: io.stratified_to_doc(io.stratified_from_doc(doc)),
}


@pytest.mark.parametrize("name", io.FIXTURES)
def test_fixture_round_trip(name):
    doc = io.load_fixture(name)
    again = io.loads(io.dumps(WRITERS[doc["kind"]](doc)))
    assert again == doc
    assert io.dumps(again) == io.dumps(doc)


def test_explicit_bundle_round_trip():
    doc = {"v": 1, "kind": "banach_bundle", "interval": [0, 1], "dim": 2,
           "grid": [0, 0.5, 1], "fibers": [[[1, 0], [0, 1]], [[1, 1], [1, -1]], [[2, 0], [0, 1]]]}
    assert io.loads(io.dumps(WRITERS["banach_bundle"](io.loads(json.dumps(doc))))) == doc


def test_layout_survives_round_trip():
    doc = io.load_fixture("paper_example")
    doc["exceptional"][0]["germs"][0]["layout"] = [[0, 1, 0]]
    B = io.stratified_from_doc(io.loads(json.dumps(doc)))
    assert B.exceptional[0].germs["left"].layout == ((0, 1, 0),)
    assert io.stratified_to_doc(B) == doc


def test_malformed_json_reports_position():
    with pytest.raises(io.ParseError, match=r"<input>:2:\d+: invalid JSON"):
        io.loads('{"v": 1,\n "kind": }')


def test_missing_version():
    with pytest.raises(io.ParseError, match='"v": 1'):
        io.loads('{"kind": "body", "vertices": [[1, 0]]}')


def test_schema_error_has_path():
    with pytest.raises(io.ParseError, match=r"\$\.vertices\[1\]\[0\]"):
        io.loads('{"v": 1, "kind": "body", "vertices": [[1, 0], ["x", 1]]}')


def test_unknown_kind_and_fixture():
    with pytest.raises(io.ParseError, match="unknown kind"):
        io.loads('{"v": 1, "kind": "torus"}')
    with pytest.raises(io.ParseError, match="unknown fixture"):
        io.load_fixture("nope")


def test_dimension_mismatch_rejected():
    doc = io.load_fixture("interp")
    doc["dim"] = 3
    with pytest.raises(ValidationError):
        io.bundle_from_doc(doc)


def test_germ_on_missing_side():
    doc = io.load_fixture("paper_example")
    doc["exceptional"][0]["germs"].append(dict(doc["exceptional"][0]["germs"][0]))
    with pytest.raises(ValidationError, match="two germs"):
        io.stratified_from_doc(doc)


def test_section_function():
    doc = io.loads(json.dumps({"v": 1, "kind": "section", "pieces": [
        {"span": [0, 1], "start": [[[1, [0, 1]], [[0, -1], 2]]], "end": [[[3, 0], [0, 2]]]},
        {"point": 1, "value": [[[5]]]}]}))
    fn = io.section_function(doc)
    v = fn(0.5, None)[0]
    assert v[0, 1] == pytest.approx(0.5j) and v[0, 0] == pytest.approx(2.0)
    assert np.allclose(fn(1.0, None)[0], [[5]])
    with pytest.raises(ValidationError):
        fn(2.0, None)


def test_dumps_canonical():
    text = io.dumps({"b": 1, "a": [1.5, 2]})
    assert text == '{\n  "a": [\n    1.5,\n    2\n  ],\n  "b": 1\n}\n'
    with pytest.raises(ValueError):
        io.dumps({"x": float("nan")})

"""JSON (schema version 1) reading and writing for bodies, Banach bundles,
stratified C*-bundles and sections."""
from __future__ import annotations

import json
from importlib import resources

import jsonschema
import numpy as np

from .bundle import DiscretizedBundle, FamilySpec
from .convex import SymmetricBody
from .errors import ValidationError
from .expectation import ExceptionalPoint, GenericInterval, StratifiedBundle
from .multimatrix import BratteliMatrix, MultiMatrixAlgebra

_number = {"type": "number"}
_vector = {"type": "array", "items": _number, "minItems": 1}
_matrix = {"type": "array", "items": _vector, "minItems": 1}
_interval = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}
_blocks = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}
_int_matrix = {"type": "array", "minItems": 1,
               "items": {"type": "array", "minItems": 1,
                         "items": {"type": "integer", "minimum": 0}}}
_entry = {"oneOf": [_number, {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}]}
_element = {"type": "array", "minItems": 1,
            "items": {"type": "array", "items": {"type": "array", "items": _entry}}}

_family = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["lp", "interp"]},
        "points": {"type": "integer", "minimum": 2},
        "p_knots": {"type": "array", "items": {"type": "array", "items": _number,
                                               "minItems": 2, "maxItems": 2}},
        "vertices": {"type": "integer", "minimum": 2},
        "start": _matrix,
        "end": _matrix,
        "seed": {"type": "integer"},
    },
    "additionalProperties": False,
}

SCHEMAS = {
    "body": {
        "type": "object",
        "required": ["v", "kind", "vertices"],
        "properties": {"v": {"const": 1}, "kind": {"const": "body"}, "vertices": _matrix},
        "additionalProperties": False,
    },
    "banach_bundle": {
        "type": "object",
        "required": ["v", "kind", "interval", "dim"],
        "properties": {
            "v": {"const": 1}, "kind": {"const": "banach_bundle"},
            "interval": _interval, "dim": {"type": "integer", "minimum": 1},
            "grid": _vector, "fibers": {"type": "array", "items": _matrix, "minItems": 1},
            "family": _family,
        },
        "oneOf": [{"required": ["family"]}, {"required": ["grid", "fibers"]}],
        "additionalProperties": False,
    },
    "stratified_cstar": {
        "type": "object",
        "required": ["v", "kind", "interval", "generic"],
        "properties": {
            "v": {"const": 1}, "kind": {"const": "stratified_cstar"},
            "interval": _interval,
            "generic": {"type": "array", "minItems": 1, "items": {
                "type": "object", "required": ["span", "blocks"],
                "properties": {"span": _interval, "blocks": _blocks},
                "additionalProperties": False}},
            "exceptional": {"type": "array", "items": {
                "type": "object", "required": ["point", "blocks", "germs"],
                "properties": {
                    "point": _number, "blocks": _blocks,
                    "germs": {"type": "array", "items": {
                        "type": "object", "required": ["side", "matrix"],
                        "properties": {"side": {"enum": ["left", "right"]},
                                       "matrix": _int_matrix,
                                       "layout": {"type": "array", "items": {
                                           "type": "array", "items": {"type": "integer", "minimum": 0}}}},
                        "additionalProperties": False}}},
                "additionalProperties": False}},
        },
        "additionalProperties": False,
    },
    "section": {
        "type": "object",
        "required": ["v", "kind", "pieces"],
        "properties": {
            "v": {"const": 1}, "kind": {"const": "section"},
            "pieces": {"type": "array", "items": {"oneOf": [
                {"type": "object", "required": ["span", "start", "end"],
                 "properties": {"span": _interval, "start": _element, "end": _element},
                 "additionalProperties": False},
                {"type": "object", "required": ["point", "value"],
                 "properties": {"point": _number, "value": _element},
                 "additionalProperties": False},
            ]}},
        },
        "additionalProperties": False,
    },
}

KINDS = tuple(SCHEMAS)


class ParseError(ValidationError):
    """Malformed or schema-invalid input document."""


def loads(text: str, source: str = "<input>") -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{source}: top level must be an object")
    if doc.get("v") != 1:
        raise ParseError(f"{source}: schema version field \"v\": 1 is required")
    kind = doc.get("kind")
    if kind not in SCHEMAS:
        raise ParseError(f"{source}: unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    try:
        jsonschema.validate(doc, SCHEMAS[kind])
    except jsonschema.ValidationError as exc:
        path = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in exc.absolute_path)
        raise ParseError(f"{source}: {path}: {exc.message}") from exc
    return doc


def load_path(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), str(path))


FIXTURES = ("cross2", "square2", "cross_const", "ellipse_const", "lp_family", "interp",
            "paper_example", "paper_example_commutative", "m2_trivial", "two_germ_21")


def load_fixture(name: str) -> dict:
    if name not in FIXTURES:
        raise ParseError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
    text = resources.files("unitarize.fixtures").joinpath(f"{name}.json").read_text("utf-8")
    return loads(text, f"fixture:{name}")


# -- documents -> objects ----------------------------------------------------

def body_from_doc(doc: dict) -> SymmetricBody:
    return SymmetricBody(doc["vertices"])


def bundle_from_doc(doc: dict) -> DiscretizedBundle:
    interval = tuple(doc["interval"])
    if "family" in doc:
        fam = dict(doc["family"])
        kind = fam.pop("type")
        if "p_knots" in fam:
            fam["p_knots"] = [tuple(k) for k in fam["p_knots"]]
        spec = FamilySpec(kind, interval=interval, dim=doc["dim"], **fam)
    else:
        spec = FamilySpec("explicit", interval=interval, dim=doc["dim"],
                          grid=doc["grid"], fibers=doc["fibers"])
    b = spec.bundle()
    if b.grid[0] < interval[0] or b.grid[-1] > interval[1]:
        raise ValidationError("grid leaves the interval")
    if b.dim != doc["dim"]:
        raise ValidationError(f"dim {doc['dim']} does not match the fibers ({b.dim})")
    return b


def stratified_from_doc(doc: dict) -> StratifiedBundle:
    generic = [GenericInterval(tuple(float(t) for t in g["span"]), MultiMatrixAlgebra(tuple(g["blocks"])))
               for g in doc["generic"]]
    by_span = {g.span: g for g in generic}
    exceptional = []
    for e in doc.get("exceptional", []):
        p = float(e["point"])
        algebra = MultiMatrixAlgebra(tuple(e["blocks"]))
        germs = {}
        for germ in e["germs"]:
            side = germ["side"]
            if side in germs:
                raise ValidationError(f"point {p}: two germs on the {side}")
            match = [g for span, g in by_span.items() if (span[1] if side == "left" else span[0]) == p]
            if not match:
                raise ValidationError(f"point {p}: no generic interval on the {side}")
            germs[side] = BratteliMatrix(germ["matrix"], algebra, match[0].algebra, germ.get("layout"))
        exceptional.append(ExceptionalPoint(p, algebra, germs))
    return StratifiedBundle(tuple(doc["interval"]), generic, exceptional)


def _element_from_json(blocks):
    out = []
    for b in blocks:
        out.append(np.array([[complex(*v) if isinstance(v, list) else complex(v) for v in row]
                             for row in b], dtype=complex))
    return out


def section_function(doc: dict):
    """Turn a section document into ``fn(x, algebra) -> blocks``.

    Generic pieces interpolate linearly from ``start`` to ``end`` across
    their span; point pieces give the value at an exceptional point.
    """
    spans = [(tuple(p["span"]), _element_from_json(p["start"]), _element_from_json(p["end"]))
             for p in doc["pieces"] if "span" in p]
    points = {float(p["point"]): _element_from_json(p["value"]) for p in doc["pieces"] if "point" in p}

    def fn(x, algebra):
        if x in points:
            return points[x]
        for (l, r), s, e in spans:
            if l <= x <= r:
                t = (x - l) / (r - l)
                return [(1 - t) * a + t * b for a, b in zip(s, e)]
        raise ValidationError(f"section undefined at x = {x}")

    return fn


# -- objects -> documents ----------------------------------------------------

def _num(x):
    """Integral values as ints so that documents serialize stably."""
    x = float(x)
    return int(x) if x.is_integer() else x


def _nums(a):
    return [_nums(v) for v in a] if np.ndim(a) else _num(a)


def body_to_doc(body: SymmetricBody) -> dict:
    return {"v": 1, "kind": "body", "vertices": _nums(body.vertices)}


def family_to_doc(spec: FamilySpec) -> dict:
    doc = {"v": 1, "kind": "banach_bundle", "interval": _nums(spec.interval), "dim": spec.dim}
    if spec.kind == "explicit":
        doc["grid"] = _nums(spec.grid)
        doc["fibers"] = [_nums(f.vertices if hasattr(f, "vertices") else f) for f in spec.fibers]
        return doc
    fam = {"type": spec.kind, "points": spec.points}
    if spec.kind == "lp":
        fam["p_knots"] = [_nums(k) for k in spec.p_knots]
        if spec.vertices is not None:
            fam["vertices"] = spec.vertices
    else:
        fam["start"] = _nums(spec.start)
        fam["end"] = _nums(spec.end)
    if spec.seed:
        fam["seed"] = spec.seed
    doc["family"] = fam
    return doc


def stratified_to_doc(B: StratifiedBundle) -> dict:
    doc = {"v": 1, "kind": "stratified_cstar", "interval": _nums(B.interval),
           "generic": [{"span": _nums(g.span), "blocks": list(g.algebra.blocks)} for g in B.generic]}
    exc = []
    for e in B.exceptional:
        germs = []
        for side in ("left", "right"):
            if side in e.germs:
                T = e.germs[side]
                g = {"side": side, "matrix": T.matrix.tolist()}
                if T.layout != BratteliMatrix(T.matrix, T.source, T.target).layout:
                    g["layout"] = [list(r) for r in T.layout]
                germs.append(g)
        exc.append({"point": _num(e.point), "blocks": list(e.algebra.blocks), "germs": germs})
    if exc:
        doc["exceptional"] = exc
    return doc


def dumps(doc) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"

"""Batch command-line front end.

    unitarize loewner|renorm|check|expect|continuity
        (--input PATH | --fixture NAME) [--eps F] [--grid-h F] [--levels K]
        [--mode blend|optimal] [--sample N] [--seed N] [--section PATH]
        [--out PATH] [--format json|csv]

Exit codes: 0 success, 1 failed verification (or optimal mode without an
optimal expectation), 2 parse/validation/hypothesis errors, 3 numerical
non-convergence or certificate failure.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import logging
import math
import os
import sys

import numpy as np

from . import io
from .bundle import bm_profile, continuity_report, renorm, vertex_sensitivity
from .ellipsoid import john_certificate, loewner
from .errors import (CertificateError, HypothesisError, NonConvergenceError,
                     UnitarizeError)
from .expectation import (NotOptimalError, Section, build_expectation,
                          bundle_rank, check_multiplicity_free, check_optimal,
                          check_pullback_cone, evaluate_expectation,
                          verify_expectation)

log = logging.getLogger("unitarize")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
EXIT_OK, EXIT_VERIFY, EXIT_PARSE, EXIT_NUMERIC = 0, 1, 2, 3


class CommandFailed(Exception):
    """Analysis ran but its outcome maps to a nonzero exit code."""

    def __init__(self, code, report, message):
        super().__init__(message)
        self.code = code
        self.report = report


def _fraction(f):
    return f"{f.numerator}/{f.denominator}"


def _csv(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _kv_csv(report) -> str:
    return _csv(["key", "value"], [(k, v if not isinstance(v, (dict, list)) else io.dumps(v).strip())
                                   for k, v in sorted(report.items())])


def _load(args, kinds):
    doc = io.load_fixture(args.fixture) if args.fixture else io.load_path(args.input)
    if doc["kind"] not in kinds:
        raise io.ParseError(f"{args.command} expects a {' or '.join(kinds)} document, got {doc['kind']!r}")
    return doc


def cmd_loewner(args):
    body = io.body_from_doc(_load(args, ("body",)))
    res = loewner(body, args.eps)
    cert = john_certificate(res)
    report = {
        "command": "loewner",
        "dim": body.dim,
        "shape": res.ellipsoid.shape.tolist(),
        "contact_points": res.contact_points.tolist(),
        "weights": [c for _, c in res.weights],
        "vertex_indices": [i for i, _ in res.weights],
        "residual": cert.residual,
        "weight_sum": cert.weight_sum,
        "contact_count": cert.contact_count,
        "iterations": res.iterations,
    }
    rows = [(i, c, *body.vertices[i]) for i, c in res.weights]
    header = ["vertex", "weight"] + [f"x{d}" for d in range(body.dim)]
    return report, _csv(header, rows)


def cmd_renorm(args):
    bundle = io.bundle_from_doc(_load(args, ("banach_bundle",)))
    ren = renorm(bundle, args.eps)
    prof = bm_profile(bundle, ren, args.sample, args.seed)
    sens = None
    if bundle.family is not None and bundle.family.kind == "lp":
        sens = vertex_sensitivity(bundle.family, args.eps)
    fibers = []
    for k, (x, b) in enumerate(zip(bundle.grid, prof)):
        row = {"x": float(x), "product_log": b.product_log,
               "sampled_product_log": b.sampled_product_log,
               "norm_into_hilbert": b.norm_into_hilbert, "norm_back": b.norm_back,
               "norm_back_sampled": b.norm_back_sampled,
               "contact_count": ren.certificates[k].contact_count}
        if sens is not None:
            row["vertex_sensitivity"] = sens[k]
        fibers.append(row)
    sup = max(b.product_log for b in prof)
    report = {
        "command": "renorm",
        "dim": bundle.dim,
        "fibers": fibers,
        "sup": sup,
        "bound": "upper bound on d_bBM realized by the identity renorming",
        "reference_half_log_n": 0.5 * math.log(bundle.dim),
    }
    header = list(fibers[0])
    return report, _csv(header, [[f[h] for h in header] for f in fibers])


def _verdict_report(B):
    report = {"command": "check", "rank": bundle_rank(B)}
    try:
        v = check_optimal(B)
    except HypothesisError as exc:
        report.update(verdict="hypothesis_failure", reason=str(exc))
        return report
    report["verdict"] = "yes" if v.optimal else "no"
    report["multiplicity_free"] = check_multiplicity_free(B)
    if v.optimal:
        report["prescribed"] = {repr(p): [float(w) for w in s.weights()] for p, s in v.prescribed.items()}
    else:
        w = v.witness
        report["witness"] = {"point": w.point,
                             "column_sums": {s: list(c) for s, c in w.column_sums.items()},
                             "restricted_weights": {s: [_fraction(f) for f in ws]
                                                    for s, ws in w.weights.items()}}
    if len(B.exceptional) == 1 and len(B.exceptional[0].germs) == 2:
        e = B.exceptional[0]
        try:
            pb = check_pullback_cone(e.germs["left"], e.germs["right"])
            report["pullback_cone"] = "yes" if pb.agree else "no"
        except HypothesisError as exc:
            report["pullback_cone"] = f"hypothesis_failure: {exc}"
    return report


def cmd_check(args):
    B = io.stratified_from_doc(_load(args, ("stratified_cstar",)))
    report = _verdict_report(B)
    return report, _kv_csv(report)


def _generic_modulus(B, s):
    """Largest step of ``s`` between neighboring grid points that share a
    generic interval; gluing gaps at exceptional points must not exceed it."""
    worst = 0.0
    for k in range(len(s.grid) - 1):
        x, y = s.grid[k], s.grid[k + 1]
        if B.exceptional_at(x) is None and B.exceptional_at(y) is None:
            worst = max(worst, max(float(np.max(np.abs(a - b)))
                                   for a, b in zip(s.values[k], s.values[k + 1])))
    return worst


def cmd_expect(args):
    B = io.stratified_from_doc(_load(args, ("stratified_cstar",)))
    try:
        E = build_expectation(B, args.grid_h, args.mode)
    except NotOptimalError as exc:
        w = exc.witness
        report = {"command": "expect", "mode": args.mode, "error": str(exc),
                  "witness": {"point": w.point,
                              "column_sums": {s: list(c) for s, c in w.column_sums.items()}}}
        raise CommandFailed(EXIT_VERIFY, report, str(exc)) from exc
    ver = verify_expectation(E, args.sample or 20, args.seed)
    rows = E.trace_rows()
    report = {
        "command": "expect",
        "mode": args.mode,
        "rank": bundle_rank(B),
        "k_value": E.k_value,
        "grid_points": len(E.grid),
        "trace": [{"x": x, "side": side, "k": k} for x, side, k in rows],
        "verify": {"passed": ver.passed, "checks": ver.checks, "witnesses": ver.witnesses},
    }
    if args.section:
        doc = io.load_path(args.section)
        if doc["kind"] != "section":
            raise io.ParseError(f"{args.section}: expected a section document")
        s = Section.from_function(B, E.grid, io.section_function(doc))
        s.modulus = _generic_modulus(B, s) + 1e-12
        ev = evaluate_expectation(E, s)
        report["section"] = {"values": [[float(v.real), float(v.imag)] for v in ev.values],
                             "section_modulus": s.modulus,
                             "gluing_residual": s.compatibility_residual(B),
                             "modulus": ev.modulus}
    text = _csv(["x", "side", "k"], rows)
    if not ver.passed:
        raise CommandFailed(EXIT_VERIFY, report, "expectation failed verification")
    return report, text


def cmd_continuity(args):
    bundle = io.bundle_from_doc(_load(args, ("banach_bundle",)))
    levels = args.levels
    source = bundle if not bundle.family.refinable else bundle.family
    rows = continuity_report(source, levels, args.eps)
    report = {"command": "continuity",
              "rows": [{"h": r.spacing, "body_distance": r.body_distance,
                        "ellipsoid_distance": r.ellipsoid_distance} for r in rows]}
    return report, _csv(["h", "body_distance", "ellipsoid_distance"],
                        [(r.spacing, r.body_distance, r.ellipsoid_distance) for r in rows])


COMMANDS = {"loewner": cmd_loewner, "renorm": cmd_renorm, "check": cmd_check,
            "expect": cmd_expect, "continuity": cmd_continuity}


def build_parser():
    p = argparse.ArgumentParser(prog="unitarize", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", metavar="PATH")
    src.add_argument("--fixture", metavar="NAME", choices=io.FIXTURES)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--grid-h", type=float, default=0.05)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--mode", choices=("blend", "optimal"), default="blend")
    p.add_argument("--sample", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--section", metavar="PATH")
    p.add_argument("--out", metavar="PATH", default="-")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    return p


def _check_ranges(args, parser):
    if not 0 < args.eps < 1:
        parser.error("--eps must lie in (0, 1)")
    if not args.grid_h > 0:
        parser.error("--grid-h must be positive")
    if args.levels < 0:
        parser.error("--levels must be nonnegative")
    if args.sample is not None and args.sample < 1:
        parser.error("--sample must be positive")


def _emit(args, text):
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _configure_logging(name):
    for h in list(log.handlers):
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(LOG_LEVELS.get(name.lower(), logging.ERROR))
    log.propagate = False


def main(argv=None) -> int:
    _configure_logging(os.environ.get("TOOL_LOG", "error"))
    parser = build_parser()
    args = parser.parse_args(argv)
    _check_ranges(args, parser)
    log.info("running %s on %s", args.command, args.fixture or args.input)
    code = EXIT_OK
    try:
        report, text = COMMANDS[args.command](args)
    except CommandFailed as exc:
        print(f"unitarize: {exc}", file=sys.stderr)
        report, text, code = exc.report, None, exc.code
    except (NonConvergenceError, CertificateError) as exc:
        print(f"unitarize: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UnitarizeError, ValueError, OSError) as exc:
        print(f"unitarize: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if args.format == "json" or text is None:
        text = io.dumps(report)
    _emit(args, text)
    return code


if __name__ == "__main__":
    sys.exit(main())

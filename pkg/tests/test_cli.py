import json
import math
import subprocess
import sys

import numpy as np
import pytest

from unitarize import cli
from unitarize.errors import NonConvergenceError
from unitarize.expectation import VerificationReport


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out), err


class TestLoewner:
    def test_cross(self, capsys):
        code, rep, _ = run_json(capsys, "loewner", "--fixture", "cross2")
        assert code == 0
        assert np.allclose(rep["shape"], [[1, 0], [0, 1]])
        assert rep["weight_sum"] == pytest.approx(2) and rep["contact_count"] == 2

    def test_square_csv(self, capsys):
        code, out, _ = run(capsys, "loewner", "--fixture", "square2", "--format", "csv")
        assert code == 0
        assert out.splitlines()[0] == "vertex,weight,x0,x1"
        _, rep, _ = run_json(capsys, "loewner", "--fixture", "square2")
        assert np.allclose(rep["shape"], [[0.5, 0], [0, 0.5]])

    def test_input_file_and_out(self, capsys, tmp_path):
        src = tmp_path / "body.json"
        src.write_text('{"v": 1, "kind": "body", "vertices": [[2, 0], [0, 1]]}')
        dest = tmp_path / "out.json"
        code, out, _ = run(capsys, "loewner", "--input", str(src), "--out", str(dest))
        assert code == 0 and out == ""
        assert np.allclose(json.loads(dest.read_text())["shape"], [[0.25, 0], [0, 1]])

    def test_malformed_json(self, capsys, tmp_path):
        src = tmp_path / "bad.json"
        src.write_text('{"v": 1, "kind": "body",\n "vertices": [[1, 0]')
        code, out, err = run(capsys, "loewner", "--input", str(src))
        assert code == 2 and out == ""
        assert f"{src}:2:" in err and "invalid JSON" in err

    def test_schema_error(self, capsys, tmp_path):
        src = tmp_path / "bad.json"
        src.write_text('{"v": 1, "kind": "body", "vertices": "none"}')
        code, _, err = run(capsys, "loewner", "--input", str(src))
        assert code == 2 and "$.vertices" in err

    def test_wrong_kind(self, capsys):
        code, _, err = run(capsys, "loewner", "--fixture", "paper_example")
        assert code == 2 and "body" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "loewner", "--input", str(tmp_path / "nope.json"))
        assert code == 2

    def test_non_convergence_exit_code(self, capsys, monkeypatch):
        def stall(*a, **k):
            raise NonConvergenceError("iteration cap reached")

        monkeypatch.setattr(cli, "loewner", stall)
        code, _, err = run(capsys, "loewner", "--fixture", "cross2")
        assert code == 3 and "iteration cap" in err


class TestRenorm:
    def test_lp_family(self, capsys):
        code, rep, _ = run_json(capsys, "renorm", "--fixture", "lp_family")
        assert code == 0
        assert rep["sup"] <= 0.5 * math.log(2) + 1e-6
        assert rep["reference_half_log_n"] == pytest.approx(0.5 * math.log(2))
        assert len(rep["fibers"]) == 11 and "vertex_sensitivity" in rep["fibers"][0]
        assert "upper bound" in rep["bound"]

    def test_cross_const(self, capsys):
        _, rep, _ = run_json(capsys, "renorm", "--fixture", "cross_const")
        assert rep["sup"] == pytest.approx(0.5 * math.log(2), abs=1e-6)

    def test_ellipse_const(self, capsys):
        _, rep, _ = run_json(capsys, "renorm", "--fixture", "ellipse_const")
        assert rep["sup"] == pytest.approx(0.0, abs=1e-3)

    def test_csv(self, capsys):
        code, out, _ = run(capsys, "renorm", "--fixture", "cross_const", "--format", "csv")
        lines = out.splitlines()
        assert code == 0 and len(lines) == 12 and lines[0].startswith("x,product_log")


class TestCheck:
    def test_swapped_germs(self, capsys):
        code, rep, _ = run_json(capsys, "check", "--fixture", "paper_example")
        assert code == 0
        assert rep["verdict"] == "no" and rep["rank"] == 3
        assert rep["witness"]["column_sums"] == {"left": [2, 1], "right": [1, 2]}
        assert rep["pullback_cone"] == "no" and rep["multiplicity_free"] is False

    def test_commutative(self, capsys):
        _, rep, _ = run_json(capsys, "check", "--fixture", "paper_example_commutative")
        assert rep["verdict"] == "no"

    def test_trivial(self, capsys):
        _, rep, _ = run_json(capsys, "check", "--fixture", "m2_trivial")
        assert rep["verdict"] == "yes" and rep["rank"] == 2

    def test_hypothesis_failure_is_distinct(self, capsys, tmp_path):
        src = tmp_path / "b.json"
        src.write_text(json.dumps({
            "v": 1, "kind": "stratified_cstar", "interval": [-1, 1],
            "generic": [{"span": [-1, 0], "blocks": [3]}, {"span": [0, 1], "blocks": [2]}],
            "exceptional": [{"point": 0, "blocks": [1], "germs": [
                {"side": "left", "matrix": [[3]]}, {"side": "right", "matrix": [[2]]}]}]}))
        code, rep, _ = run_json(capsys, "check", "--input", str(src))
        assert code == 0 and rep["verdict"] == "hypothesis_failure"
        assert "not dense" in rep["reason"]
        code, _, err = run(capsys, "expect", "--input", str(src), "--mode", "optimal")
        assert code == 2 and "not dense" in err


class TestExpect:
    def test_swapped_blend(self, capsys):
        code, rep, _ = run_json(capsys, "expect", "--fixture", "paper_example")
        assert code == 0 and rep["k_value"] == 4.0 and rep["verify"]["passed"]

    def test_swapped_optimal_fails(self, capsys):
        code, rep, err = run_json(capsys, "expect", "--fixture", "paper_example", "--mode", "optimal")
        assert code == 1
        assert rep["witness"]["column_sums"] == {"left": [2, 1], "right": [1, 2]}
        assert "(2, 1)" in err and "(1, 2)" in err

    def test_optimal_ranks(self, capsys):
        _, rep, _ = run_json(capsys, "expect", "--fixture", "m2_trivial", "--mode", "optimal")
        assert rep["k_value"] == 2
        _, rep, _ = run_json(capsys, "expect", "--fixture", "two_germ_21", "--mode", "optimal")
        assert rep["k_value"] == pytest.approx(3, abs=1e-12)

    def test_trace_csv(self, capsys):
        code, out, _ = run(capsys, "expect", "--fixture", "paper_example", "--format", "csv",
                           "--grid-h", "0.25")
        lines = out.splitlines()
        assert lines[0] == "x,side,k"
        assert "0.0,left,4.0" in lines and "0.0,right,4.0" in lines

    def test_section(self, capsys, tmp_path):
        src = tmp_path / "s.json"
        src.write_text(json.dumps({"v": 1, "kind": "section", "pieces": [
            {"span": [-1, 0], "start": [[[1, 0, 0], [0, 1, 0], [0, 0, 1]]],
             "end": [[[1, 0, 0], [0, 1, 0], [0, 0, 0]]]},
            {"span": [0, 1], "start": [[[1, 0, 0], [0, 0, 0], [0, 0, 0]]],
             "end": [[[1, 0, 0], [0, 1, 0], [0, 0, 1]]]},
            {"point": 0, "value": [[[1]], [[0]]]}]}))
        code, rep, _ = run_json(capsys, "expect", "--fixture", "paper_example", "--section", str(src))
        assert code == 0
        i = [r["x"] for r in rep["trace"] if r["side"] == ""].index(0.0)
        assert rep["section"]["values"][i] == pytest.approx([0.5, 0.0])

    def test_verify_failure_exit_code(self, capsys, monkeypatch):
        monkeypatch.setattr(cli, "verify_expectation",
                            lambda *a, **k: VerificationReport(4.0, 1, {"index": False}, []))
        code, rep, _ = run_json(capsys, "expect", "--fixture", "paper_example")
        assert code == 1 and rep["verify"]["passed"] is False

    def test_bad_grid(self, capsys):
        code, _, err = run(capsys, "expect", "--fixture", "paper_example", "--grid-h", "3")
        assert code == 2 and "exceeds" in err


class TestContinuity:
    def test_interp(self, capsys):
        code, rep, _ = run_json(capsys, "continuity", "--fixture", "interp", "--levels", "3")
        body = [r["body_distance"] for r in rep["rows"]]
        assert code == 0 and len(body) == 4
        assert all(b / a == pytest.approx(0.5, abs=0.05) for a, b in zip(body, body[1:]))

    def test_constant(self, capsys):
        _, rep, _ = run_json(capsys, "continuity", "--fixture", "cross_const", "--levels", "1")
        assert all(r["body_distance"] == 0 and r["ellipsoid_distance"] < 1e-9 for r in rep["rows"])

    def test_explicit_single_level(self, capsys, tmp_path):
        src = tmp_path / "b.json"
        src.write_text(json.dumps({"v": 1, "kind": "banach_bundle", "interval": [0, 1], "dim": 2,
                                   "grid": [0, 1], "fibers": [[[1, 0], [0, 1]], [[1, 1], [1, -1]]]}))
        code, _, err = run(capsys, "continuity", "--input", str(src), "--levels", "2")
        assert code == 2 and "single-level" in err
        code, rep, _ = run_json(capsys, "continuity", "--input", str(src), "--levels", "0")
        assert code == 0 and len(rep["rows"]) == 1


class TestArguments:
    @pytest.mark.parametrize("argv", [
        ["loewner"], ["loewner", "--fixture", "nope"], ["bogus", "--fixture", "cross2"],
        ["loewner", "--fixture", "cross2", "--eps", "2"],
        ["expect", "--fixture", "m2_trivial", "--grid-h", "-1"],
        ["continuity", "--fixture", "interp", "--levels", "-1"],
    ])
    def test_usage_errors(self, argv, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(argv)
        assert info.value.code == 2

    def test_log_level(self, capsys, monkeypatch):
        monkeypatch.setenv("TOOL_LOG", "info")
        code, _, err = run(capsys, "check", "--fixture", "m2_trivial")
        assert code == 0 and "INFO unitarize: running check" in err
        monkeypatch.setenv("TOOL_LOG", "error")
        _, _, err = run(capsys, "check", "--fixture", "m2_trivial")
        assert err == ""


def test_console_entry_points_agree(tmp_path):
    outs = []
    for cmd in (["unitarize"], [sys.executable, "-m", "unitarize"]):
        proc = subprocess.run(cmd + ["check", "--fixture", "paper_example"],
                              capture_output=True, text=True, check=True)
        outs.append(proc.stdout)
    assert outs[0] == outs[1] and json.loads(outs[0])["verdict"] == "no"

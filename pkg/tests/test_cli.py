import csv
import json
import shutil

import pytest

from extremalkit import dumps
from extremalkit.cli import RunConfig, execute, lookup, main, match_expected, parse_budget, parse_tol
from extremalkit.core import SchemaError
from extremalkit.corpus import CORPUS_ENV, CORPUS_IDS, corpus_dir, load_example, manifest_path
from extremalkit.io import Problem

EXIT = {"walkthrough2cone": 0, "decomp-quadrant": 0, "ex4.3": 2, "ex4.4": 2, "ex4.5-trunc": 2,
        "qc-pair": 2, "ex3.3i": 2, "ex3.3ii": 2}

WALK = {
    "dimension": 2,
    "cones": [{"kind": "polyhedral_cone", "rows": [[1, 0], [-1, 0], [0, -1]]}, {"kind": "halfspace", "normal": [0, 1]}],
    "shifts": [[0, 0], [0, 1]],
    "weights": {"rule": "geometric", "base": 0.5},
    "operations": ["solve"],
}


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def strip_volatile(report):
    report = dict(report)
    report.pop("wall_time_s", None)
    return report


@pytest.fixture
def problem_file(tmp_path):
    def write(doc, name="p.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)
    return write


class TestReproduce:
    @pytest.mark.parametrize("example_id", CORPUS_IDS)
    def test_labels_and_exit_code(self, example_id, capsys):
        code, rep, _ = run(["reproduce", example_id], capsys)
        assert rep["label_match"], rep["mismatches"]
        assert code == EXIT[example_id]

    def test_ex43_zero_euler(self, capsys):
        _, rep, _ = run(["reproduce", "ex4.3"], capsys)
        assert rep["results"]["nonoverlap"]["outcome"] == "violated"
        assert rep["results"]["euler"]["result"]["detail"]["lp_value"] <= 1e-9

    def test_walkthrough_values(self, capsys):
        _, rep, _ = run(["reproduce", "walkthrough2cone"], capsys)
        cert = rep["results"]["solve"]["result"]["certificate"]
        assert cert["x_tilde"] == pytest.approx([0, -1 / 3], abs=1e-6)

    def test_unknown_id_rejected_by_parser(self):
        with pytest.raises(SystemExit):
            main(["reproduce", "nope"])

    def test_corpus_dir_override(self, tmp_path, monkeypatch, capsys):
        for f in corpus_dir().glob("qc-pair*"):
            shutil.copy(f, tmp_path / f.name)
        exp = json.loads((tmp_path / "qc-pair.expected.json").read_text())
        exp["labels"]["nonoverlap"] = "holds"
        (tmp_path / "qc-pair.expected.json").write_text(json.dumps(exp))
        monkeypatch.setenv(CORPUS_ENV, str(tmp_path))
        _, rep, _ = run(["reproduce", "qc-pair"], capsys)
        assert not rep["label_match"]
        assert any("nonoverlap" in m for m in rep["mismatches"])

    def test_missing_corpus_file(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv(CORPUS_ENV, str(tmp_path))
        code, rep, err = run(["reproduce", "ex4.3"], capsys)
        assert code == 1 and "not found" in rep["error"]["message"]


class TestBatch:
    def test_corpus_manifest(self, capsys):
        code, rep, _ = run(["batch", str(manifest_path()), "--quiet"], capsys)
        assert code == 0

    def test_corpus_manifest_report(self, tmp_path, capsys):
        out = tmp_path / "batch.json"
        main(["batch", str(manifest_path()), "--quiet", "--output", str(out)])
        rep = json.loads(out.read_text())
        assert rep["all_matched"]
        assert set(rep["matrix"]) == set(CORPUS_IDS)
        assert rep["matrix"]["ex4.3"]["exit_code"] == 2

    def test_empty_manifest(self, problem_file, capsys):
        code, rep, _ = run(["batch", problem_file({"entries": []})], capsys)
        assert code == 0 and rep["entries"] == []

    def test_one_mislabeled_entry(self, problem_file, capsys):
        man = {"entries": [
            {"reproduce": "qc-pair"},
            {"reproduce": "decomp-quadrant", "expected": {"labels": {"qualification": "violated"}}},
        ]}
        code, rep, _ = run(["batch", problem_file(man)], capsys)
        assert code == 2
        assert rep["matrix"]["qc-pair"]["label_match"]
        assert not rep["matrix"]["decomp-quadrant"]["label_match"]

    def test_input_entries_and_parallel(self, tmp_path, problem_file, capsys):
        problem_file(WALK, "walk.json")
        man = {"entries": [
            {"name": "walk", "input": "walk.json", "expected": {"exit_code": 0, "labels": {"solve": "holds"}}},
            {"reproduce": "qc-pair"},
        ]}
        seq, rep_seq, _ = run(["batch", problem_file(man, "m.json")], capsys)
        par, rep_par, _ = run(["batch", str(tmp_path / "m.json"), "--jobs", "2"], capsys)
        assert seq == par == 0
        assert rep_seq["matrix"] == rep_par["matrix"]

    def test_invalid_manifest(self, problem_file, capsys):
        code, rep, err = run(["batch", problem_file({"entries": [{"seed": 1}]})], capsys)
        assert code == 1 and "error" in rep

    def test_missing_manifest(self, tmp_path, capsys):
        code, _, _ = run(["batch", str(tmp_path / "absent.json")], capsys)
        assert code == 1


class TestCommands:
    def test_solve(self, problem_file, capsys):
        code, rep, _ = run(["solve", "--input", problem_file(WALK)], capsys)
        assert code == 0
        assert rep["results"]["solve"]["outcome"] == "holds"

    def test_check_kinds(self, problem_file, capsys):
        path = problem_file(WALK)
        assert run(["check", "nonoverlap", "--input", path], capsys)[0] == 0
        # (0,-1) normal to the ray cancels (0,1) normal to the halfplane
        assert run(["check", "qualification", "--input", path], capsys)[0] == 2

    def test_check_needs_sets(self, problem_file, capsys):
        code, rep, err = run(["check", "set_extremality", "--input", problem_file(WALK)], capsys)
        assert code == 1 and rep["error"]["pointer"] == "/sets"

    def test_decompose_modes(self, problem_file, capsys):
        doc = {"dimension": 2, "cones": [{"kind": "halfspace", "normal": [0, 1]},
                                         {"kind": "halfspace", "normal": [1, 0]}],
               "decomposition": {"mode": "refined", "x_star": [1, 1]}, "epsilon": 0.1}
        path = problem_file(doc)
        code, rep, _ = run(["decompose", "refined", "--input", path], capsys)
        assert code == 0 and rep["results"]["decompose"]["result"]["residual"] <= 1e-7
        code, rep, _ = run(["decompose", "fuzzy", "--input", path], capsys)
        assert code == 0 and rep["results"]["decompose"]["result"]["residual"] <= 0.1

    def test_tangency_tne(self, problem_file, capsys):
        doc = {"dimension": 2, "sets": [{"kind": "halfspace", "normal": [0, 1]}], "point": [0, 0]}
        code, rep, _ = run(["tangency", "tne", "--input", problem_file(doc)], capsys)
        assert code == 0

    def test_fan_csv(self, problem_file, tmp_path, capsys):
        doc = {"dimension": 2, "sets": [{"kind": "epigraph", "function": "square", "params": {"coef": -1}}]}
        out = tmp_path / "fan.csv"
        code = main(["tangency", "fan", "--input", problem_file(doc), "--output", str(out), "--quiet",
                     "--samples", "90"])
        assert code == 0
        rows = list(csv.reader(out.open()))
        assert rows[0][:1] == ["t"] and len(rows) > 10
        assert all(float(r[2]) >= -1e-6 for r in rows[1:])

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--version"])
        assert info.value.code == 0


class TestErrors:
    def test_schema_error_has_pointer(self, problem_file, capsys):
        doc = dict(WALK, cones=[{"kind": "halfspace", "normal": "up"}])
        code, rep, err = run(["solve", "--input", problem_file(doc)], capsys)
        assert code == 1
        assert rep["error"]["pointer"].startswith("/cones/0")
        assert "error at /cones/0" in err

    def test_unknown_field(self, problem_file, capsys):
        code, rep, _ = run(["solve", "--input", problem_file(dict(WALK, colour="red"))], capsys)
        assert code == 1 and rep["error"]["type"] == "SchemaError"

    def test_shift_shape_mismatch(self, problem_file, capsys):
        code, rep, _ = run(["solve", "--input", problem_file(dict(WALK, shifts=[[0, 0]]))], capsys)
        assert code == 1 and rep["error"]["pointer"] == "/shifts"

    def test_not_json(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{")
        assert run(["solve", "--input", str(p)], capsys)[0] == 1

    def test_missing_input(self, capsys):
        assert run(["solve"], capsys)[0] == 1

    def test_bad_tol_flag(self, problem_file, capsys):
        assert main(["solve", "--input", problem_file(WALK), "--tol", "speed=3"]) == 1

    def test_bad_budget_flag(self, problem_file, capsys):
        path = problem_file(WALK)
        assert main(["solve", "--input", path, "--budget", "[1]"]) == 1
        assert run(["solve", "--input", path, "--budget", '{"warp": 1}'], capsys)[0] == 1


class TestParsing:
    def test_tol_float(self):
        assert parse_tol("1e-9") == {"euler": 1e-9, "norm": 1e-9}

    def test_tol_pairs(self):
        assert parse_tol("euler=1e-7, zero=1e-12") == {"euler": 1e-7, "zero": 1e-12}

    @pytest.mark.parametrize("text", ["abc", "euler=", "nope=1"])
    def test_tol_rejects(self, text):
        with pytest.raises(SchemaError):
            parse_tol(text)

    def test_budget(self):
        assert parse_budget('{"n_dirs": 32}') == {"n_dirs": 32}
        assert parse_budget(None) == {}

    def test_lookup(self):
        res = {"solve": {"outcome": "holds", "result": {"v": [[1, 2], [3, 4]]}}}
        assert lookup(res, "solve") == "holds"
        assert lookup(res, "solve.result.v.1.0") == 3

    def test_match_expected_values(self):
        rep = {"exit_code": 0, "results": {"a": {"outcome": "holds", "result": {"x": [1.0, 2.0]}}}}
        good = {"exit_code": 0, "labels": {"a": "holds"},
                "values": [{"path": "a.result.x", "value": [1, 2.0000001], "tol": 1e-6}]}
        assert match_expected(rep, good) == []
        bad = {"exit_code": 2, "labels": {"b": "holds"}, "values": [{"path": "a.result.x", "value": [1, 3]}]}
        assert len(match_expected(rep, bad)) == 3


class TestInvariants:
    @pytest.mark.parametrize("example_id", ["walkthrough2cone", "ex4.3", "decomp-quadrant", "ex3.3ii"])
    def test_determinism(self, example_id):
        cfg = RunConfig(command="reproduce", argument=example_id, seed=7)
        from extremalkit.cli import reproduce
        a, _ = reproduce(cfg)
        b, _ = reproduce(cfg)
        assert dumps(strip_volatile(a)) == dumps(strip_volatile(b))

    @pytest.mark.parametrize("example_id", CORPUS_IDS)
    def test_schema_round_trip(self, example_id):
        doc, _ = load_example(example_id)
        once = Problem.from_dict(doc).to_dict()
        twice = Problem.from_dict(once).to_dict()
        assert dumps(once) == dumps(twice)

    def test_flags_override_problem_solver(self, problem_file):
        doc = dict(WALK, solver={"seed": 3, "max_iter": 50, "tol": 1e-6})
        rep, ctx = execute(RunConfig(command="solve", input_path=problem_file(doc), seed=11, tol={"euler": 1e-10}))
        assert ctx.seed == 11 and ctx.max_iter == 50
        assert ctx.tol.euler == 1e-10 and ctx.tol.norm == 1e-6
        assert ctx.budget.seed == 11

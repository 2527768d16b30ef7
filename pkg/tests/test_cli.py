import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qcpvlp import io as qio
from qcpvlp.cli import main, parse_grid, parse_seeds, UsageError


def run(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_example_primal(capsys):
    code, out, _ = run(["solve", "--builtin", "example41", "--algorithm", "primal"], capsys)
    assert code == 0
    res = json.loads(out)
    assert res["value"] == pytest.approx(-2.494, abs=5e-4)
    for key in ("x", "y", "iterations", "lp_solves", "failed_cuts", "wall_time"):
        assert key in res


def test_solve_example_dual_with_c(capsys, tmp_path):
    log, dump = tmp_path / "log.csv", tmp_path / "fig"
    code, out, _ = run(["solve", "--builtin", "example41", "--algorithm", "dual",
                        "--c=-0.25,1", "--log", str(log), "--dump-approx", str(dump)], capsys)
    assert code == 0 and json.loads(out)["iterations"] == 4
    rows = list(csv.DictReader(open(log)))
    assert len(rows) == 4 and {"iteration", "t", "t_star", "phi", "action"} <= set(rows[0])
    prim = list(csv.reader(open(f"{dump}_primal.csv")))
    dual = list(csv.reader(open(f"{dump}_dual.csv")))
    assert prim[0][:3] == ["image", "type", "processed"] and len(prim) > 1 and len(dual) > 1


def test_solve_result_file_roundtrip_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["solve", "--builtin", "lmp", "--seed", "3", "--algorithm", "dual",
                     "--output", str(path)]) == 0
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    ra.pop("wall_time"), rb.pop("wall_time")
    assert ra == rb
    assert json.loads(json.dumps(ra)) == ra


def test_enumeration_modes(capsys):
    code, out, _ = run(["solve", "--builtin", "example41", "--algorithm", "benson-primal"], capsys)
    assert code == 0 and len(json.loads(out)["points"]) == 3
    code, out, _ = run(["solve", "--builtin", "example41", "--algorithm", "benson-dual"], capsys)
    assert code == 0 and len(json.loads(out)["dual_points"]) == 4


def test_dc_builtin_reports_original_solution(capsys):
    code, out, _ = run(["solve", "--builtin", "example73", "--param", "q=2"], capsys)
    res = json.loads(out)
    assert code == 0 and res["dc_value"] == pytest.approx(0, abs=1e-6)
    np.testing.assert_allclose(res["dc_solution"], [1, 1], atol=1e-6)


def test_malformed_json_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(["solve", "--input", str(bad)], capsys)
    assert code == 2 and json.loads(err)["error"] == "parse"


def test_unknown_family_exit_2(tmp_path, capsys):
    f = tmp_path / "p.json"
    f.write_text(json.dumps({"family": "nope"}))
    assert run(["solve", "--input", str(f)], capsys)[0] == 2


def test_missing_source_exit_2(capsys):
    assert run(["solve"], capsys)[0] == 2
    assert run(["solve", "--builtin", "example41", "--algorithm", "bogus"], capsys)[0] == 2


def test_solver_failure_exit_1(tmp_path, capsys):
    raw = {"family": "raw_qcp", "P": [[1.0, 0.0], [0.0, 1.0]], "A": [[1.0, 0.0]], "b": [0.0],
           "objective": {"name": "linear", "params": {"a": [1.0, 1.0]}}}
    f = tmp_path / "unbounded.json"
    f.write_text(json.dumps(raw))
    code, _, err = run(["solve", "--input", str(f)], capsys)
    assert code == 1 and "AssumptionError" in json.loads(err)["error"]


def test_raw_qcp(tmp_path, capsys):
    raw = {"family": "raw_qcp", "P": [[1.0, 0.0], [0.0, 1.0]],
           "A": [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [-1.0, -1.0]],
           "b": [0.0, 0.0, -2.0, -2.0, -3.0], "cone": {"Y": [[-1.0, 0.0], [0.0, -1.0]]},
           "objective": {"name": "neg_square", "params": {}}}
    f = tmp_path / "raw.json"
    f.write_text(json.dumps(raw))
    # -|y|^2 is monotone for the negative orthant; the minimum sits at (2, 1) or (1, 2)
    code, out, _ = run(["solve", "--input", str(f), "--algorithm", "dual"], capsys)
    assert code == 0 and json.loads(out)["value"] == pytest.approx(-5)


def test_gen_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert main(["gen", "lmp", "--q", "2", "--m", "20", "--n", "30", "--seed", "1",
                     "--output", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    loaded = qio.load_problem(a)
    assert loaded.model.P.shape == (2, 30)


def test_gen_cqp_embeds_sine_floor(capsys):
    code, out, _ = run(["gen", "cqp", "--q", "3", "--n", "200"], capsys)
    P = np.array(json.loads(out)["P"])
    ref = [[math.floor(3 * math.sin(j * 3 + i + 1)) for j in range(200)] for i in range(3)]
    assert code == 0 and np.array_equal(P, ref)


def test_gen_usage_errors(capsys):
    assert run(["gen", "lmp", "--q", "0"], capsys)[0] == 2
    assert run(["gen", "lmp", "--q", "2"], capsys)[0] == 2


def test_bench(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    assert main(["bench", "lmp", "--grid", "2:10:8", "--seeds", "0-2", "--output", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 1 and rows[0]["seeds"] == "3"
    for alg in ("primal", "dual", "dual-se"):
        assert float(rows[0][f"{alg}_iterations"]) >= 1
        assert rows[0][f"{alg}_failures"] == "0"


def test_bench_usage_errors(capsys):
    assert run(["bench", "lmp", "--grid", "2:20:30", "--seeds", ""], capsys)[0] == 2
    assert run(["bench", "lmp", "--grid", "2:20", "--seeds", "0"], capsys)[0] == 2


def test_parsers():
    assert parse_seeds("0-2,7") == [0, 1, 2, 7]
    assert parse_grid("2:20:30, 3:50:30", "lmp") == [(2, 20, 30), (3, 50, 30)]
    with pytest.raises(UsageError):
        parse_seeds(" , ")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qcpvlp", "solve", "--builtin", "example61"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["value"] == pytest.approx(-5)

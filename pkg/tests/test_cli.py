import csv
import io
import json

import numpy as np
import pytest

from splitsys import cli
from splitsys.harness import generate_planted_system, save_instance
from splitsys.operators import AffineOperator


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_generate_writes_instance(tmp_path, capsys):
    path = tmp_path / "i.json"
    code, out, _ = run(["generate", "--n", 2, "--m", 2, "--structure", "affine_vi", "--seed", 7,
                        "--out", path], capsys)
    assert code == 0
    d = json.loads(path.read_text())
    assert d["n"] == 2 and d["m"] == 2 and len(d["components"]) == 2
    r = float(out.split("residual:")[1])
    assert r <= 1e-8


def test_generate_m_zero_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["generate", "--n", "2", "--m", "0", "--out", str(tmp_path / "x.json")])
    assert exc.value.code == 2


def test_generate_mixed_l1(tmp_path, capsys):
    path = tmp_path / "l1.json"
    code, _, _ = run(["generate", "--structure", "mixed_l1", "--n", 5, "--m", 2, "--out", path], capsys)
    assert code == 0
    kinds = [c["B"]["kind"] for c in json.loads(path.read_text())["components"]]
    assert kinds.count("l1") == 1


def test_solve_planted_instance(tmp_path, capsys):
    code, out, _ = run(["solve", "--n", 10, "--m", 2, "--seed", 3, "--out-dir", tmp_path], capsys)
    assert code == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["status"] == "solved" and metrics["final_residual"] <= 1e-6
    with open(tmp_path / "trace.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == metrics["iterations"] + 1


def test_solve_from_file_with_verify(tmp_path, capsys):
    path = tmp_path / "i.json"
    save_instance(generate_planted_system(10, 5, seed=2, structure="mixed_l1"), path)
    code, _, _ = run(["solve", "--instance", path, "--verify", "--out-dir", tmp_path], capsys)
    assert code == 0


def test_solve_iteration_cap(tmp_path, capsys):
    code, out, _ = run(["solve", "--n", 50, "--m", 5, "--seed", 1, "--max-outer", 1,
                        "--out-dir", tmp_path], capsys)
    assert code == 3
    assert "max_iterations" in out


def test_solve_linesearch_failure_exit(tmp_path, capsys):
    # X = [2, 3] lies outside C = [0, 1]: every backtracked probe leaves dom B
    d = {"name": "outside", "n": 1, "m": 1, "seed": 0, "R": 1.0,
         "X": {"kind": "box", "lo": [2.0], "hi": [3.0]},
         "components": [{"A": AffineOperator(np.eye(1)).to_dict(),
                         "B": {"kind": "normal_cone", "set": {"kind": "box", "lo": [0.0], "hi": [1.0]}}}]}
    path = tmp_path / "i.json"
    path.write_text(json.dumps(d))
    with pytest.warns(UserWarning, match="not contained"):
        code, _, err = run(["solve", "--instance", path, "--beta", 1.0, "--out-dir", tmp_path], capsys)
    assert code == 4
    assert "operator domain" in err
    assert (tmp_path / "trace.csv").exists()


@pytest.mark.parametrize("flag, value", [("--delta", 1.5), ("--theta", 0), ("--beta-lo", 2.0),
                                         ("--beta", "fast")])
def test_solve_bad_params_exit_2(tmp_path, capsys, flag, value):
    code, _, err = run(["solve", flag, value, "--out-dir", tmp_path], capsys)
    assert code == 2
    assert "error" in err


def test_missing_instance_file_is_io_error(tmp_path, capsys):
    code, _, err = run(["solve", "--instance", tmp_path / "nope.json", "--out-dir", tmp_path], capsys)
    assert code == 5


def test_verify_catalog_instance_passes(capsys):
    code, out, _ = run(["verify", "--n", 2, "--m", 2, "--seed", 1, "--pairs", 300], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert all(line.startswith("[PASS]") for line in lines)
    assert any("resolvent of normal cone is the projection" in line for line in lines)


def test_verify_finds_non_monotone_map(tmp_path, capsys):
    inst = generate_planted_system(3, 1, seed=0)
    d = inst.to_dict()
    M = np.diag([1.0, -0.5, 2.0])
    d["components"][0]["A"] = AffineOperator(M, -M @ inst.known_solution, check=False).to_dict()
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(d))
    code, _, _ = run(["verify", "--instance", path], capsys)
    assert code == 2  # rejected at load time without the override
    code, out, _ = run(["verify", "--instance", path, "--allow-unchecked", "--pairs", 200], capsys)
    assert code == 1
    assert "[FAIL] affine: forward map monotone" in out
    report = json.loads(out.strip().splitlines()[-1])
    x, y = np.array(report["counterexample"]["x"]), np.array(report["counterexample"]["y"])
    assert (M @ (x - y)) @ (x - y) < 0


def test_bench_default_suite(capsys):
    code, out, _ = run(["bench", "--no-oracle"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    hybrid = [r for r in rows if r["solver"] == "hybrid"]
    assert len(hybrid) == 20
    assert all(r["status"] == "solved" for r in hybrid)
    assert {r["solver"] for r in rows} == {"hybrid", "baseline_fb"}
    assert rows == sorted(rows, key=lambda r: (r["instance"], r["solver"]))


def test_bench_empty_suite(capsys):
    code, _, err = run(["bench", "--suite"], capsys)
    assert code == 2
    assert "empty suite" in err


def test_bench_marks_oracle_failure_excluded(tmp_path, capsys):
    good = tmp_path / "good.json"
    save_instance(generate_planted_system(2, 2, seed=1), good)
    bad = generate_planted_system(2, 1, seed=2).to_dict()
    bad["name"] = "unsolvable"
    bad.pop("known_solution")
    # x + 5 = 0 has no solution in the box X, so the oracle residual stays large
    bad["components"][0] = {"A": AffineOperator(np.eye(2), 5 * np.ones(2)).to_dict(),
                            "B": {"kind": "zero", "n": 2}}
    (tmp_path / "bad.json").write_text(json.dumps(bad))
    out_csv = tmp_path / "bench.csv"
    code, _, _ = run(["bench", "--suite", good, tmp_path / "bad.json", "--out", out_csv,
                      "--max-outer", 200], capsys)
    assert code == 0
    with open(out_csv, newline="") as fh:
        rows = {(r["instance"], r["solver"]): r for r in csv.DictReader(fh)}
    assert rows[("unsolvable", "hybrid")]["status"] == "excluded"
    assert rows[("affine_vi-n2-m2-s1", "hybrid")]["status"] == "solved"


def test_seed_environment_override(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SPLITSYS_SEED", "13")
    run(["generate", "--n", 2, "--m", 1, "--seed", 1, "--out", tmp_path / "a.json"], capsys)
    assert json.loads((tmp_path / "a.json").read_text())["seed"] == 13
    monkeypatch.setenv("SPLITSYS_SEED", "x")
    code, _, _ = run(["generate", "--n", 2, "--m", 1, "--out", tmp_path / "b.json"], capsys)
    assert code == 2


def test_solve_outputs_are_reproducible(tmp_path, capsys):
    for d in ("a", "b"):
        run(["solve", "--n", 10, "--m", 5, "--seed", 4, "--structure", "mixed_l1",
             "--out-dir", tmp_path / d], capsys)
    strip = [[r[:-1] for r in csv.reader(open(tmp_path / d / "trace.csv"))] for d in ("a", "b")]
    assert strip[0] == strip[1]
    ma, mb = (json.loads((tmp_path / d / "metrics.json").read_text()) for d in ("a", "b"))
    for key in ma["volatile"]:
        ma.pop(key), mb.pop(key)
    assert ma == mb

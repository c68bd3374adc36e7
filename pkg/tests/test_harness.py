"""Experiment harness: spec parsing, runners, reports and CLI."""

import numpy as np
import pytest

from dgsem.cli import main
from dgsem.harness import (
    ExperimentSpec,
    bench_blocks,
    bounds_table,
    emit_report,
    load_spec,
    parse_spec,
    run_bisection_lambda,
    run_convergence,
    run_mp_scan,
)


def test_parse_spec_grammar():
    spec = parse_spec("""
    # comment
    problem = steady-1d
    p = 1,2,3
    mesh = 20,40
    lambda = 1.0
    limiter = scaling
    timing = on
    """)
    assert spec.problem == "steady-1d"
    assert spec.p_list == (1, 2, 3)
    assert spec.mesh_list == (20, 40)
    assert spec.lam == 1.0
    assert spec.limiter == "scaling"
    assert spec.timing is True


def test_parse_spec_rejects_unknown_key():
    with pytest.raises(ValueError, match="unknown key"):
        parse_spec("problme = steady-1d")
    with pytest.raises(ValueError, match="key = value"):
        parse_spec("just words")


def test_load_packaged_configs():
    for name in ("table2", "table3", "table5", "table6", "table7",
                 "table8", "table9", "table10", "table11", "box3d"):
        spec = load_spec(name)
        assert spec.problem
    with pytest.raises(FileNotFoundError):
        load_spec("table99")


def test_emit_report_empty_and_significant_digits(tmp_path):
    path = tmp_path / "empty.csv"
    emit_report([], str(path), header=["a", "b"])
    assert path.read_text() == "a,b\n"
    path2 = tmp_path / "rows.csv"
    emit_report([{"a": 1, "b": 0.123456789}], str(path2))
    assert path2.read_text() == "a,b\n1,0.123457\n"


def test_bounds_table_values():
    rows = bounds_table(3)
    assert rows[0]["quantity"] == "lambda_min"
    assert abs(rows[0]["p2"] - 0.25) <= 1e-10
    assert abs(rows[1]["p3"] - 3 * (1 + np.sqrt(5.0))) <= 1e-6


def test_run_convergence_rows_and_determinism(tmp_path):
    spec = ExperimentSpec(problem="steady-1d", p_list=(1, 2), mesh_list=(20, 40),
                          lam=1.0, limiter="scaling")
    rows = run_convergence(spec)
    assert len(rows) == 4
    assert rows[1]["order2"] == pytest.approx(2.0, abs=0.2)
    assert rows[3]["order2"] == pytest.approx(3.0, abs=0.2)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_report(rows, str(a))
    emit_report(run_convergence(spec), str(b))
    assert a.read_bytes() == b.read_bytes()


def test_run_convergence_threads_match_serial(tmp_path):
    spec = ExperimentSpec(problem="steady-1d", p_list=(1, 2), mesh_list=(10, 20), lam=1.0)
    a, b = tmp_path / "s.csv", tmp_path / "t.csv"
    emit_report(run_convergence(spec, threads=1), str(a))
    emit_report(run_convergence(spec, threads=3), str(b))
    assert a.read_bytes() == b.read_bytes()


def test_run_convergence_unknown_problem():
    with pytest.raises(ValueError, match="unknown problem"):
        run_convergence(ExperimentSpec(problem="nope"))


def test_mp_scan_1d_rows():
    spec = ExperimentSpec(problem="zs-profile-1d", p_list=(2,), mesh_list=(50,),
                          lam_list=(0.1, 0.5), tmax=0.005)
    rows = run_mp_scan(spec)
    assert len(rows) == 2
    low = next(r for r in rows if r["lambda"] == 0.1)
    high = next(r for r in rows if r["lambda"] == 0.5)
    assert low["minavg"] < -1e-9        # below the threshold: violation
    assert high["minavg"] >= -1e-12     # above: compliant


def test_mp_scan_2d_pulse_rows():
    spec = ExperimentSpec(problem="pulse-2d", p_list=(2,), mesh_list=(10,),
                          lam_list=(1.0,), modes=("none", "fct"), steps=1)
    rows = run_mp_scan(spec)
    assert len(rows) == 2
    plain = next(r for r in rows if r["mode"] == "none")
    fct = next(r for r in rows if r["mode"] == "fct")
    assert plain["minavg"] < -1e-9
    assert fct["minavg"] >= -1e-12 and fct["maxavg"] <= 1.0 + 1e-9


def test_bisection_small_degrees():
    spec = ExperimentSpec(problem="zs-profile-1d", p_list=(1, 2))
    rows = run_bisection_lambda(spec)
    assert rows[0]["lambda_min_exp"] == 0.0
    assert abs(rows[1]["lambda_min_exp"] - 0.25) <= 0.01


def test_bench_smoke_and_gate():
    rows = bench_blocks(p_max=2, trials=3, inner=3)
    assert len(rows) == 8
    for row in rows:
        assert row["max_rel_err"] <= 1e-9
        assert row["dense_median"] > 0 and row["fast_median"] > 0
        assert row["fast_slower"] in (0, 1)


def test_cli_bounds_and_run(tmp_path, capsys):
    assert main(["bounds", "--p-max", "2"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("quantity,")
    spec = tmp_path / "mini.spec"
    spec.write_text("problem = steady-1d\np = 1\nmesh = 10\nlambda = 1.0\n")
    target = tmp_path / "mini.csv"
    assert main(["run", "--spec", str(spec), "--out", str(target)]) == 0
    lines = target.read_text().splitlines()
    assert lines[0].split(",")[:3] == ["p", "N", "L2"]
    assert len(lines) == 2


def test_cli_error_paths(tmp_path, capsys):
    assert main(["run", "--spec", str(tmp_path / "missing.spec")]) == 1
    bad = tmp_path / "bad.spec"
    bad.write_text("problem = not-a-problem\n")
    assert main(["run", "--spec", str(bad)]) == 1

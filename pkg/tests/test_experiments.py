import csv
import json

import pytest

from coupledsft.cli import main
from coupledsft.experiments import (
    COLUMNS,
    ConfigError,
    ConvergenceReport,
    ReportWriteError,
    SweepConfig,
    build_family,
    emit_report,
    load_config,
    report_csv,
    report_from_json,
    report_json,
    run_sweep,
)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(ln for ln in fh if not ln.startswith("#")))


def test_config_validation():
    with pytest.raises(ConfigError):
        SweepConfig(tol=0)
    with pytest.raises(ConfigError):
        SweepConfig(ms=())
    with pytest.raises(ConfigError):
        SweepConfig(ms=(6, 4))
    with pytest.raises(ConfigError):
        SweepConfig(mode="thm9")
    with pytest.raises(ConfigError):
        SweepConfig.from_dict({"bogus": 1})
    cfg = SweepConfig.from_dict({"m_range": {"start": 4, "stop": 10, "step": 3}})
    assert cfg.ms == (4, 7, 10)


def test_family_block():
    fam = build_family(SweepConfig(mode="thm2.1", family={"name": "toy", "gluing": "full"}, theta=2))
    assert fam.sequence(40) == (80, 40)
    with pytest.raises(ConfigError):
        build_family(SweepConfig(mode="thm2.1"))  # the six-symbol family is not thm2.1
    with pytest.raises(ConfigError):
        build_family(SweepConfig(family={"name": "nope"}))


def test_load_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"mode": "thm1.2", "ms": [4, 6], "seed": 5}))
    assert load_config(str(path)).seed == 5
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_symmetric_theta_one_rows_are_exact():
    rep = run_sweep(SweepConfig(mode="thm2.1", family={"name": "toy", "gluing": "full"}, theta=1.0,
                                ms=(10, 20, 40)))
    assert all(r.mass_A == pytest.approx(0.5, abs=1e-12) for r in rep.rows)
    assert rep.passed


def test_theta_two_error_decreases():
    rep = run_sweep(SweepConfig(mode="thm2.1", family={"name": "toy", "gluing": "full"}, theta=2.0,
                                ms=(40, 80, 160, 320), tol=0.05, weakstar_depth=2))
    errs = [abs(r.mass_A - 2 / 3) for r in rep.rows]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert rep.checks["final_mass_within_tol"]


def test_six_symbol_sweep_report(tmp_path):
    rep = run_sweep(SweepConfig(ms=(4, 6, 8, 10, 12, 14)))
    assert rep.complete and rep.passed
    assert rep.constants["Lambda"] == pytest.approx(16.0)
    csv_path, json_path = emit_report(rep, str(tmp_path))
    rows = read_csv(csv_path)
    assert tuple(rows[0]) == COLUMNS
    summary = json.loads(open(json_path).read())
    # cross-file consistency
    assert float(rows[-1][COLUMNS.index("mass_A")]) == summary["final_mass_A"]
    assert summary["seed"] == 0
    assert open(csv_path).readline().startswith("# mode=thm1.2 seed=0")


def test_determinism(tmp_path):
    cfg = SweepConfig(ms=(4, 6), seed=11)
    a = emit_report(run_sweep(cfg), str(tmp_path / "a"))
    b = emit_report(run_sweep(cfg), str(tmp_path / "b"))
    for pa, pb in zip(a, b):
        assert open(pa, "rb").read() == open(pb, "rb").read()


def test_geom_sweep_is_deterministic():
    cfg = SweepConfig(mode="thm1.3", ms=(4, 6), seed=2, lyapunov_orbits=5, lyapunov_length=200)
    assert report_csv(run_sweep(cfg)) == report_csv(run_sweep(cfg))


def test_parallel_matches_serial():
    cfg = SweepConfig(ms=(4, 6, 8))
    serial = run_sweep(cfg)
    parallel = run_sweep(SweepConfig(ms=(4, 6, 8), workers=2))
    assert report_csv(serial) == report_csv(parallel)


def test_empty_report_marker():
    rep = ConvergenceReport(SweepConfig())
    text = report_csv(rep)
    lines = text.splitlines()
    assert lines[1] == ",".join(COLUMNS)
    assert lines[-1] == "# empty: no rows"
    assert json.loads(report_json(rep))["empty"] is True


def test_decreasing_block_lengths_are_rejected():
    cfg = SweepConfig(family={"name": "six_symbol", "nprime_rule": {"kind": "affine", "a": -1, "b": 8}},
                      ms=(4, 5, 7))
    with pytest.raises(Exception):
        run_sweep(cfg)


def test_failure_is_recorded_with_partial_rows():
    cfg = SweepConfig(ms=(4, 5))
    rep = ConvergenceReport(cfg, rows=run_sweep(SweepConfig(ms=(4,))).rows,
                            failure={"m": 5, "error": "ArithmeticError: m=5, stage=perron: boom"})
    text = report_csv(rep)
    assert "# failed: m=5" in text
    assert len(read_csv_text(text)) == 2


def read_csv_text(text):
    return list(csv.reader(ln for ln in text.splitlines() if not ln.startswith("#")))


def test_unwritable_path_keeps_report(tmp_path):
    rep = run_sweep(SweepConfig(ms=(4,)))
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ReportWriteError):
        emit_report(rep, str(blocker / "sub"))
    assert rep.rows and rep.passed is not None


def test_report_round_trip():
    rep = run_sweep(SweepConfig(ms=(4, 6)))
    again = report_from_json(report_json(rep))
    assert report_csv(again) == report_csv(rep)


# -- command line --------------------------------------------------------------


def test_cli_sweep_and_emit(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["sweep", "--m", "4", "6", "--out", str(out)]) == 0
    assert main(["emit", str(out / "thm1_2.json"), "--out", str(tmp_path / "again"), "--stem", "thm1_2"]) == 0
    assert (out / "thm1_2.csv").read_bytes() == (tmp_path / "again" / "thm1_2.csv").read_bytes()


def test_cli_exit_codes(tmp_path):
    assert main(["sweep", "--m", "6", "4"]) == 2
    assert main(["sweep", "--mode", "thm2.1", "--m", "4"]) == 2
    assert main(["sweep", "--m", "4", "--config", str(tmp_path / "missing.json")]) == 2
    # far too tight a tolerance on a small thm2.1 sweep
    cfg = tmp_path / "t.json"
    cfg.write_text(json.dumps({"mode": "thm2.1", "family": {"name": "toy", "gluing": "full"},
                               "theta": 2, "ms": [10, 20]}))
    assert main(["sweep", "--config", str(cfg), "--tol", "1e-6"]) == 1


def test_cli_pressure_and_geom(tmp_path, capsys):
    assert main(["pressure", "--m", "4", "5"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("m,n_m,nprime_m,states")
    assert main(["geom", "--m", "4", "6", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "breakpoints.csv").exists()
    assert (tmp_path / "thm1_3.json").exists()


def test_cli_verify_subset(tmp_path, capsys):
    assert main(["verify", "--only", "9,10", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "verify.json").read_text())
    assert summary["passed"] == 2 and summary["failed"] == 0

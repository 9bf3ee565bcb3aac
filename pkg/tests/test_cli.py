"""Tests for halphen.cli module."""

import csv
import io
import json
import os
from unittest.mock import patch

import pytest

from halphen.cli import Report, _jsonable, build_parser, main, parse, render


def _run(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr()


def test_verify_forms_passes(capsys):
    code, out = _run(capsys, ["verify", "forms", "--samples", "5"])
    assert code == 0
    report = json.loads(out.out)
    assert report["command"] == "verify forms"
    assert report["pass"] is True
    assert report["params"]["samples"] == 5
    names = {c["name"] for c in report["checks"]}
    assert {"jacobi_quartic_max", "e2_s_law_max", "theta_log_derivative_max"} <= names
    assert report["wall_time"] >= 0


def test_verify_dh_passes(capsys):
    code, out = _run(capsys, ["verify", "dh", "--samples", "20", "--t-max", "3"])
    assert code == 0
    assert json.loads(out.out)["pass"] is True


def test_verify_dh_negative_t_is_a_failed_check(capsys):
    code, out = _run(capsys, ["verify", "dh", "--t-min", "-1", "--samples", "5"])
    assert code == 1
    report = json.loads(out.out)
    assert report["pass"] is False
    failed = [c for c in report["checks"] if not c["pass"]]
    assert any("DomainError" in str(c["measured"]) for c in failed)


def test_verify_csv_format(capsys):
    code, out = _run(capsys, ["verify", "forms", "--samples", "3", "--format", "csv"])
    assert code == 0
    rows = list(csv.reader(io.StringIO(out.out)))
    assert rows[0] == ["name", "measured", "tolerance", "pass"]
    assert all(row[3] == "True" for row in rows[1:])


def test_global_flags_before_subcommand(capsys):
    code, out = _run(
        capsys, ["--format", "csv", "--seed", "3", "verify", "forms", "--samples", "3"]
    )
    assert code == 0
    assert out.out.startswith("name,measured,tolerance,pass")


def test_seed_changes_params(capsys):
    _, first = _run(capsys, ["verify", "forms", "--samples", "3", "--seed", "1"])
    assert json.loads(first.out)["params"]["seed"] == 1


def test_moduli_resultant(capsys):
    code, out = _run(capsys, ["moduli", "resultant", "--samples", "20"])
    assert code == 0
    checks = {c["name"]: c for c in json.loads(out.out)["checks"]}
    assert checks["planted_roots_rejected"]["measured"] == 10
    assert checks["example_13_delta"]["pass"] is True


def test_monopole_dirac(capsys):
    code, out = _run(capsys, ["monopole", "dirac", "--k", "3"])
    assert code == 0
    checks = {c["name"]: c for c in json.loads(out.out)["checks"]}
    assert checks["origin_rejected"]["pass"] is True


def test_moduli_spectrum_csv(capsys):
    code, out = _run(
        capsys, ["moduli", "spectrum", "--n", "400", "--n-eigs", "3", "--format", "csv"]
    )
    assert code == 0
    rows = list(csv.reader(io.StringIO(out.out)))
    assert rows[0] == ["n", "E_n"]
    assert len(rows) == 4
    assert float(rows[1][1]) == pytest.approx(1 / 3.141592653589793, rel=1e-3)


def test_moduli_spectrum_json_has_data(capsys):
    code, out = _run(capsys, ["moduli", "spectrum", "--n", "400", "--n-eigs", "2"])
    assert code == 0
    report = json.loads(out.out)
    assert [row[0] for row in report["data"]] == [1, 2]


def test_sweep_dh_to_file(tmp_path, capsys):
    target = tmp_path / "dh.csv"
    code, out = _run(capsys, [
        "sweep", "dh", "--samples", "6", "--format", "csv", "--out", str(target),
    ])
    assert code == 0
    assert out.out == ""
    lines = target.read_text().splitlines()
    assert lines[0] == "t,theta1,theta2,theta3"
    assert len(lines) == 7


def test_usage_errors_exit_2(capsys):
    for argv in (
        [],
        ["verify"],
        ["verify", "forms", "--samples", "0"],
        ["verify", "dh", "--tol", "-1"],
        ["verify", "dh", "--t-min", "3", "--t-max", "1"],
        ["moduli", "spectrum", "--preset", "bogus"],
    ):
        with pytest.raises(SystemExit) as exc_info:
            main(argv)
        assert exc_info.value.code == 2
    capsys.readouterr()


def test_parse_returns_handler():
    args = parse(["moduli", "geodesic", "--arc", "2.5"])
    assert args.arc == 2.5
    assert args.format == "json"
    assert callable(args.func)


def test_build_parser_lists_groups():
    help_text = build_parser().format_help()
    for group in ("verify", "sweep", "monopole", "moduli", "history"):
        assert group in help_text


def test_render_non_finite_values():
    report = Report("verify forms", {})
    report.below("nan_check", float("nan"), 1.0)
    envelope = _jsonable(report.envelope(0.0))
    assert envelope["checks"][0]["measured"] == "nan"
    assert json.loads(render(report, envelope, "json"))["pass"] is False
    assert "nan_check,nan,1.0,False" in render(report, envelope, "csv")


def test_empty_report_does_not_pass():
    assert Report("verify forms", {}).passed is False


def test_record_and_history(tmp_path, capsys):
    db_path = tmp_path / "runs.db"
    with patch.dict(os.environ, {"HALPHEN_DB": str(db_path)}):
        code, _ = _run(capsys, ["moduli", "resultant", "--samples", "10", "--record"])
        assert code == 0
        code, _ = _run(capsys, ["verify", "dh", "--t-min", "-1", "--samples", "3", "--record"])
        assert code == 1

        code, out = _run(capsys, ["history", "list", "--json"])
        assert code == 0
        runs = json.loads(out.out)
        assert [r["command"] for r in runs] == ["verify dh", "moduli resultant"]

        code, out = _run(capsys, ["history", "list", "--failed", "--json"])
        assert [r["command"] for r in json.loads(out.out)] == ["verify dh"]

        run_id = runs[-1]["run_id"]
        code, out = _run(capsys, ["history", "show", str(run_id), "--json"])
        assert code == 0
        shown = json.loads(out.out)
        assert shown["params"]["samples"] == 10
        assert shown["checks"][0]["name"] == "sylvester_vs_closed_form"

        code, out = _run(capsys, ["history", "list"])
        assert "moduli resultant" in out.out

        code, out = _run(capsys, ["history", "show", "999"])
        assert code == 1
        assert "No run" in out.err

        code, out = _run(capsys, ["history", "db"])
        assert out.out.strip() == str(db_path)
    assert db_path.exists()


def _failed_names(out):
    report = json.loads(out.out)
    assert report["pass"] is False
    return {c["name"] for c in report["checks"] if not c["pass"]}


def test_negative_lambda_is_a_failed_check(capsys):
    code, out = _run(capsys, ["monopole", "energy", "--lambda", "-1", "--samples", "5"])
    assert code == 1
    assert "energy" in _failed_names(out)
    assert "Traceback" not in out.err


def test_single_point_grid_is_a_failed_check(capsys):
    code, out = _run(capsys, ["verify", "bogomolny", "--grid", "1"])
    assert code == 1
    assert "bogomolny_analytic" in _failed_names(out)


def test_geodesic_on_degenerate_tail_fails_fast(capsys):
    argv = ["moduli", "geodesic", "--t-min", "5", "--t-max", "6", "--arc", "1"]
    code, out = _run(capsys, argv)
    assert code == 1
    assert "geodesic" in _failed_names(out)


def test_sweep_metric_taub_nut(capsys):
    argv = ["sweep", "metric", "--provider", "taub-nut", "--t-min", "0.5", "--t-max", "3"]
    code, out = _run(capsys, argv)
    assert code == 0
    report = json.loads(out.out)
    assert report["pass"] is True
    assert len(report["data"]) == 26


def test_history_show_last_and_delete(tmp_path, capsys):
    with patch.dict(os.environ, {"HALPHEN_DB": str(tmp_path / "runs.db")}):
        code, out = _run(capsys, ["history", "show", "last"])
        assert code == 1
        assert "No run" in out.err

        _run(capsys, ["moduli", "resultant", "--samples", "5", "--record"])
        _run(capsys, ["monopole", "dirac", "--record"])

        code, out = _run(capsys, ["history", "show", "last", "--json"])
        assert code == 0
        last = json.loads(out.out)
        assert last["command"] == "monopole dirac"

        code, out = _run(capsys, ["history", "delete", str(last["run_id"])])
        assert code == 0
        assert f"Deleted run {last['run_id']}" in out.err

        code, out = _run(capsys, ["history", "list", "--json"])
        assert [r["command"] for r in json.loads(out.out)] == ["moduli resultant"]

        code, out = _run(capsys, ["history", "delete", str(last["run_id"])])
        assert code == 1
        assert "No run" in out.err


def test_history_rejects_malformed_run_id(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["history", "show", "newest"])
    assert exc.value.code == 2

"""Tests for halphen.db module."""

import json
import sqlite3
from pathlib import Path

import pytest

from halphen.db import (
    delete_run,
    get_checks,
    get_connection,
    get_meta,
    get_run,
    get_runs,
    init_schema,
    record_run,
    update_meta,
)


def _make_db(tmp_path: Path):
    """Create a temp DB for testing."""
    conn = get_connection(tmp_path / "test.db")
    init_schema(conn)
    return conn


def _report(command="verify forms", passed=True, checks=None):
    return {
        "command": command,
        "params": {"samples": 50, "seed": 0},
        "checks": checks if checks is not None else [
            {"name": "jacobi_quartic_max", "measured": 3e-15, "tolerance": 1e-12, "pass": True},
            {"name": "e2_s_law_max", "measured": 2e-14, "tolerance": 1e-10, "pass": True},
        ],
        "pass": passed,
        "wall_time": 0.25,
    }


def test_init_schema_creates_tables(tmp_path):
    conn = _make_db(tmp_path)
    tables = conn.execute(
        "SELECT name FROM sqlite_master WHERE type='table' ORDER BY name"
    ).fetchall()
    names = {r["name"] for r in tables}
    assert "runs" in names
    assert "checks" in names
    assert "meta" in names
    conn.close()


def test_init_schema_idempotent(tmp_path):
    conn = _make_db(tmp_path)
    init_schema(conn)  # second call should not raise
    conn.close()


def test_get_connection_creates_parent_dir(tmp_path):
    conn = get_connection(tmp_path / "nested" / "dir" / "runs.db")
    init_schema(conn)
    assert (tmp_path / "nested" / "dir" / "runs.db").exists()
    conn.close()


def test_record_run_roundtrip(tmp_path):
    conn = _make_db(tmp_path)
    run_id = record_run(conn, _report())

    run = get_run(conn, run_id)
    assert run["command"] == "verify forms"
    assert run["passed"] == 1
    assert run["wall_time"] == pytest.approx(0.25)
    assert json.loads(run["params_json"]) == {"samples": 50, "seed": 0}
    assert run["created_at"]
    conn.close()


def test_checks_keep_report_order(tmp_path):
    conn = _make_db(tmp_path)
    run_id = record_run(conn, _report())
    checks = get_checks(conn, run_id)
    assert [c["name"] for c in checks] == ["jacobi_quartic_max", "e2_s_law_max"]
    assert json.loads(checks[0]["measured_json"]) == pytest.approx(3e-15)
    assert checks[1]["tolerance"] == pytest.approx(1e-10)
    conn.close()


def test_string_measurement_and_missing_tolerance(tmp_path):
    conn = _make_db(tmp_path)
    run_id = record_run(conn, _report(passed=False, checks=[
        {"name": "closed_form_dh_residual", "measured": "DomainError: Im(tau) <= 0",
         "tolerance": None, "pass": False},
    ]))
    check = get_checks(conn, run_id)[0]
    assert json.loads(check["measured_json"]) == "DomainError: Im(tau) <= 0"
    assert check["tolerance"] is None
    assert check["passed"] == 0
    conn.close()


def test_get_runs_newest_first(tmp_path):
    conn = _make_db(tmp_path)
    first = record_run(conn, _report())
    second = record_run(conn, _report("verify dh"))
    assert [r["run_id"] for r in get_runs(conn)] == [second, first]
    conn.close()


def test_get_runs_filters(tmp_path):
    conn = _make_db(tmp_path)
    record_run(conn, _report("verify forms"))
    record_run(conn, _report("verify dh", passed=False))
    record_run(conn, _report("moduli spectrum"))

    assert {r["command"] for r in get_runs(conn, command_filter="verify")} == {
        "verify forms", "verify dh",
    }
    failed = get_runs(conn, failed_only=True)
    assert [r["command"] for r in failed] == ["verify dh"]
    assert get_runs(conn, command_filter="moduli", failed_only=True) == []
    conn.close()


def test_get_run_missing(tmp_path):
    conn = _make_db(tmp_path)
    assert get_run(conn, 42) is None
    assert get_checks(conn, 42) == []
    conn.close()


def test_delete_run_cascades_to_checks(tmp_path):
    conn = _make_db(tmp_path)
    run_id = record_run(conn, _report())
    delete_run(conn, run_id)
    assert get_run(conn, run_id) is None
    count = conn.execute("SELECT COUNT(*) FROM checks").fetchone()[0]
    assert count == 0
    conn.close()


def test_record_run_sets_last_run_id(tmp_path):
    conn = _make_db(tmp_path)
    run_id = record_run(conn, _report())
    assert get_meta(conn, "last_run_id") == str(run_id)
    conn.close()


def test_negative_wall_time_rejected(tmp_path):
    conn = _make_db(tmp_path)
    report = _report()
    report["wall_time"] = -1.0
    with pytest.raises(sqlite3.IntegrityError):
        record_run(conn, report)
    conn.close()


def test_meta(tmp_path):
    conn = _make_db(tmp_path)
    assert get_meta(conn, "test_key") is None

    update_meta(conn, "test_key", "test_value")
    conn.commit()
    assert get_meta(conn, "test_key") == "test_value"

    update_meta(conn, "test_key", "new_value")
    conn.commit()
    assert get_meta(conn, "test_key") == "new_value"
    conn.close()


def test_wal_mode(tmp_path):
    conn = _make_db(tmp_path)
    mode = conn.execute("PRAGMA journal_mode").fetchone()[0]
    assert mode == "wal"
    conn.close()

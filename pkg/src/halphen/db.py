"""SQLite archive of run reports: schema, connection management and query helpers."""

import json
import sqlite3
from datetime import datetime, timezone
from pathlib import Path

from halphen.config import get_db_path


def get_connection(path: Path | None = None) -> sqlite3.Connection:
    """Open a SQLite connection with WAL mode and row factory."""
    if path is None:
        path = get_db_path()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    conn = sqlite3.connect(str(path), timeout=10)
    conn.row_factory = sqlite3.Row
    conn.execute("PRAGMA journal_mode=WAL")
    conn.execute("PRAGMA busy_timeout=5000")
    conn.execute("PRAGMA foreign_keys=ON")
    return conn


def init_schema(conn: sqlite3.Connection) -> None:
    """Create tables and indexes if they don't exist."""
    conn.executescript("""
        CREATE TABLE IF NOT EXISTS runs (
            run_id       INTEGER PRIMARY KEY AUTOINCREMENT,
            command      TEXT NOT NULL,
            params_json  TEXT NOT NULL,
            passed       INTEGER NOT NULL CHECK(passed IN (0, 1)),
            wall_time    REAL NOT NULL CHECK(wall_time >= 0),
            created_at   TEXT NOT NULL
        );

        CREATE TABLE IF NOT EXISTS checks (
            run_id         INTEGER NOT NULL REFERENCES runs(run_id) ON DELETE CASCADE,
            position       INTEGER NOT NULL,
            name           TEXT NOT NULL,
            measured_json  TEXT NOT NULL,
            tolerance      REAL,
            passed         INTEGER NOT NULL CHECK(passed IN (0, 1)),
            PRIMARY KEY (run_id, position)
        );

        CREATE TABLE IF NOT EXISTS meta (
            key   TEXT PRIMARY KEY,
            value TEXT NOT NULL
        );

        CREATE INDEX IF NOT EXISTS idx_runs_command ON runs(command);
        CREATE INDEX IF NOT EXISTS idx_runs_created_at ON runs(created_at);
    """)
    conn.commit()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def record_run(conn: sqlite3.Connection, report: dict) -> int:
    """Insert a report envelope and its checks; returns the new run_id."""
    cur = conn.execute(
        "INSERT INTO runs (command, params_json, passed, wall_time, created_at) "
        "VALUES (?, ?, ?, ?, ?)",
        (
            report["command"],
            json.dumps(report.get("params", {}), sort_keys=True),
            int(bool(report["pass"])),
            float(report.get("wall_time", 0.0)),
            _now(),
        ),
    )
    run_id = cur.lastrowid
    conn.executemany(
        "INSERT INTO checks (run_id, position, name, measured_json, tolerance, passed) "
        "VALUES (?, ?, ?, ?, ?, ?)",
        [
            (
                run_id, pos, check["name"], json.dumps(check["measured"]),
                check.get("tolerance"), int(bool(check["pass"])),
            )
            for pos, check in enumerate(report.get("checks", []))
        ],
    )
    update_meta(conn, "last_run_id", str(run_id))
    conn.commit()
    return run_id


def get_runs(
    conn: sqlite3.Connection,
    command_filter: str | None = None,
    failed_only: bool = False,
) -> list[sqlite3.Row]:
    """Return runs newest first, optionally filtered by command prefix or failure."""
    query = "SELECT * FROM runs "
    conditions = []
    params: list[str] = []
    if command_filter:
        conditions.append("command LIKE ?")
        params.append(f"{command_filter}%")
    if failed_only:
        conditions.append("passed = 0")
    if conditions:
        query += "WHERE " + " AND ".join(conditions) + " "
    query += "ORDER BY run_id DESC"
    return conn.execute(query, params).fetchall()


def get_run(conn: sqlite3.Connection, run_id: int) -> sqlite3.Row | None:
    return conn.execute("SELECT * FROM runs WHERE run_id = ?", (run_id,)).fetchone()


def get_checks(conn: sqlite3.Connection, run_id: int) -> list[sqlite3.Row]:
    """Checks of a run in report order."""
    return conn.execute(
        "SELECT * FROM checks WHERE run_id = ? ORDER BY position", (run_id,)
    ).fetchall()


def delete_run(conn: sqlite3.Connection, run_id: int) -> None:
    """Delete a run; its checks go with it."""
    conn.execute("DELETE FROM runs WHERE run_id = ?", (run_id,))
    conn.commit()


def update_meta(conn: sqlite3.Connection, key: str, value: str) -> None:
    """Upsert a meta key-value pair."""
    conn.execute(
        "INSERT OR REPLACE INTO meta (key, value) VALUES (?, ?)",
        (key, value),
    )


def get_meta(conn: sqlite3.Connection, key: str) -> str | None:
    """Get a meta value by key."""
    row = conn.execute("SELECT value FROM meta WHERE key = ?", (key,)).fetchone()
    return row["value"] if row else None

"""Embedded row store on top of SQLite.

Physical tables live next to the monitor's private metadata tables
(prefixed `_crm_`), which no f-unit can name: f-unit and table names may
not start with an underscore.
"""
from __future__ import annotations

import logging
import secrets
import sqlite3
import threading
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

from sqlglot import exp

from src.schema.declarations import LocalTableDecl

logger = logging.getLogger(__name__)

WRITE_DIALECT = "sqlite"

METADATA = (
    "CREATE TABLE IF NOT EXISTS _crm_meta (name TEXT PRIMARY KEY, value TEXT NOT NULL)",
    "CREATE TABLE IF NOT EXISTS _crm_funits (funit TEXT PRIMARY KEY, source TEXT NOT NULL, position INTEGER NOT NULL)",
    "CREATE TABLE IF NOT EXISTS _crm_wirings (position INTEGER PRIMARY KEY, source TEXT NOT NULL)",
    "CREATE TABLE IF NOT EXISTS _crm_activations (parent TEXT NOT NULL, child TEXT NOT NULL, PRIMARY KEY (parent, child))",
    "CREATE TABLE IF NOT EXISTS _crm_nodes (name TEXT PRIMARY KEY)",
    "CREATE TABLE IF NOT EXISTS _crm_sequences (physical TEXT PRIMARY KEY, next INTEGER NOT NULL)",
)


def quote(name: str) -> str:
    return exp.to_identifier(name, quoted=True).sql(dialect=WRITE_DIALECT)


def _concat_as_pipes(node: exp.Expression) -> exp.Expression:
    if not isinstance(node, exp.Concat):
        return node
    parts = node.expressions
    if len(parts) == 1:
        return parts[0]
    joined = parts[0]
    for part in parts[1:]:
        joined = exp.DPipe(this=joined, expression=part)
    return exp.Paren(this=joined)


def render(tree: exp.Expression) -> str:
    """SQLite text for `tree`. CONCAT becomes `||`, which is NULL as soon as one argument is NULL, as in MySQL."""
    return tree.transform(_concat_as_pipes).sql(dialect=WRITE_DIALECT)


class Store:
    """
    One SQLite connection shared by all sessions.

    Every statement runs inside `transaction()`, which holds the store lock
    for its whole duration and rolls back on any exception.
    """

    def __init__(self, path: str | Path = ":memory:", secret_key: str | None = None):
        self.path = str(path)
        self.connection = sqlite3.connect(self.path, check_same_thread=False, isolation_level=None)
        self.lock = threading.RLock()
        self._depth = 0
        for statement in METADATA:
            self.connection.execute(statement)
        self.secret_key = self._load_secret_key(secret_key)

    def _load_secret_key(self, explicit: str | None) -> str:
        row = self.connection.execute("SELECT value FROM _crm_meta WHERE name = 'sk'").fetchone()
        if row is not None and explicit is None:
            return row[0]
        key = explicit or secrets.token_hex(32)
        self.connection.execute("INSERT OR REPLACE INTO _crm_meta (name, value) VALUES ('sk', ?)", (key,))
        return key

    def close(self) -> None:
        self.connection.close()

    @contextmanager
    def transaction(self) -> Iterator[sqlite3.Connection]:
        with self.lock:
            if self._depth:
                # nested units join the outer transaction
                self._depth += 1
                try:
                    yield self.connection
                finally:
                    self._depth -= 1
                return
            self.connection.execute("BEGIN IMMEDIATE")
            self._depth = 1
            try:
                yield self.connection
            except BaseException:
                self.connection.execute("ROLLBACK")
                raise
            else:
                self.connection.execute("COMMIT")
            finally:
                self._depth = 0

    def execute(self, sql: str, params: dict | tuple = ()) -> sqlite3.Cursor:
        with self.lock:
            return self.connection.execute(sql, params)

    def query(self, sql: str, params: dict | tuple = ()) -> tuple[list[str], list[tuple]]:
        with self.lock:
            cursor = self.connection.execute(sql, params)
            columns = [d[0] for d in cursor.description or ()]
            return columns, cursor.fetchall()

    # Physical tables

    def create_table(self, physical: str, table: LocalTableDecl) -> None:
        columns = []
        for column in table.columns:
            definition = f"{quote(column.name)} {column.type.storage_type}"
            if column.type.name == "KEY":
                definition += " NOT NULL UNIQUE"
            columns.append(definition)
        self.connection.execute(f"CREATE TABLE {quote(physical)} ({', '.join(columns)})")
        logger.debug(f"Created table {physical}")

    def drop_table(self, physical: str) -> None:
        self.connection.execute(f"DROP TABLE IF EXISTS {quote(physical)}")
        self.connection.execute("DELETE FROM _crm_sequences WHERE physical = ?", (physical,))

    def table_exists(self, physical: str) -> bool:
        row = self.connection.execute(
            "SELECT 1 FROM sqlite_master WHERE type = 'table' AND name = ? COLLATE NOCASE", (physical,)
        ).fetchone()
        return row is not None

    def next_key(self, physical: str, key_column: str) -> str:
        """Monitor-generated keys: a per-table counter rendered as text, skipping taken values."""
        row = self.connection.execute("SELECT next FROM _crm_sequences WHERE physical = ?", (physical,)).fetchone()
        value = row[0] if row else 1
        while self.connection.execute(
            f"SELECT 1 FROM {quote(physical)} WHERE {quote(key_column)} = ?", (str(value),)
        ).fetchone():
            value += 1
        self.connection.execute(
            "INSERT OR REPLACE INTO _crm_sequences (physical, next) VALUES (?, ?)", (physical, value + 1)
        )
        return str(value)

    def dump(self) -> list[tuple]:
        """Every row of every table, for byte-level comparisons."""
        with self.lock:
            tables = [r[0] for r in self.connection.execute(
                "SELECT name FROM sqlite_master WHERE type = 'table' ORDER BY name"
            )]
            rows = []
            for table in tables:
                for row in self.connection.execute(f"SELECT * FROM {quote(table)} ORDER BY rowid"):
                    rows.append((table, *row))
            return rows

    # Metadata

    def save_funit(self, funit: str, source: str) -> None:
        position = self.connection.execute("SELECT COALESCE(MAX(position), 0) + 1 FROM _crm_funits").fetchone()[0]
        self.connection.execute(
            "INSERT OR REPLACE INTO _crm_funits (funit, source, position) VALUES (?, ?, ?)", (funit, source, position)
        )

    def delete_funit(self, funit: str) -> None:
        self.connection.execute("DELETE FROM _crm_funits WHERE funit = ?", (funit,))

    def load_funits(self) -> list[tuple[str, str]]:
        return self.connection.execute("SELECT funit, source FROM _crm_funits ORDER BY position").fetchall()

    def save_wirings(self, sources: list[str]) -> None:
        self.connection.execute("DELETE FROM _crm_wirings")
        self.connection.executemany(
            "INSERT INTO _crm_wirings (position, source) VALUES (?, ?)", list(enumerate(sources))
        )

    def load_wirings(self) -> list[str]:
        return [r[0] for r in self.connection.execute("SELECT source FROM _crm_wirings ORDER BY position")]

    def save_graph(self, nodes: set[str], activations: set[tuple[str, str]]) -> None:
        self.connection.execute("DELETE FROM _crm_nodes")
        self.connection.execute("DELETE FROM _crm_activations")
        self.connection.executemany("INSERT INTO _crm_nodes (name) VALUES (?)", [(n,) for n in sorted(nodes)])
        self.connection.executemany(
            "INSERT INTO _crm_activations (parent, child) VALUES (?, ?)", sorted(activations)
        )

    def load_graph(self) -> tuple[list[str], list[tuple[str, str]]]:
        nodes = [r[0] for r in self.connection.execute("SELECT name FROM _crm_nodes ORDER BY name")]
        edges = self.connection.execute("SELECT parent, child FROM _crm_activations ORDER BY parent, child").fetchall()
        return nodes, edges

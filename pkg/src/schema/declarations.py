"""Declarations of an f-unit's `.db` file."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from src.schema.invariant import InvariantExpr, default_invariant

MARKER_TYPES = ("KEY", "OWNER")
NUMERIC_TYPES = ("INT",)
TEXT_TYPES = ("TINYTEXT", "TEXT", "VARCHAR")
TYPE_NAMES = MARKER_TYPES + NUMERIC_TYPES + TEXT_TYPES


@dataclass(frozen=True)
class SqlType:
    name: str
    length: Optional[int] = None

    def __str__(self) -> str:
        return f"{self.name}({self.length})" if self.length is not None else self.name

    @property
    def is_marker(self) -> bool:
        return self.name in MARKER_TYPES

    @property
    def is_numeric(self) -> bool:
        return self.name in NUMERIC_TYPES

    @property
    def storage_type(self) -> str:
        # KEY and OWNER are text at the storage layer
        return "INTEGER" if self.is_numeric else "TEXT"


KEY = SqlType("KEY")
OWNER = SqlType("OWNER")
INT = SqlType("INT")
TEXT = SqlType("TEXT")


@dataclass(frozen=True)
class Column:
    name: str
    type: SqlType


@dataclass(frozen=True)
class ForeignKeyDecl:
    """`FOREIGN KEY (column) REFERENCES parent_table(parent_column)` inside a local table."""

    column: str
    parent_table: str
    parent_column: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class TableDecl:
    name: str
    columns: tuple[Column, ...]
    line: int = field(default=0, compare=False)

    def column(self, name: str) -> Column | None:
        for column in self.columns:
            if column.name.lower() == name.lower():
                return column
        return None

    def marker_columns(self, marker: str) -> list[Column]:
        return [c for c in self.columns if c.type.name == marker]

    @property
    def key_column(self) -> str:
        return self.marker_columns("KEY")[0].name

    @property
    def owner_column(self) -> str:
        return self.marker_columns("OWNER")[0].name

    @property
    def data_columns(self) -> tuple[Column, ...]:
        """Columns taking part in table predicates: all but the KEY column."""
        return tuple(c for c in self.columns if c.type.name != "KEY")


@dataclass(frozen=True)
class LocalTableDecl(TableDecl):
    foreign_keys: tuple[ForeignKeyDecl, ...] = ()


@dataclass(frozen=True)
class InputTableDecl(TableDecl):
    pass


@dataclass(frozen=True)
class OutputTableDecl:
    name: str
    query: str
    invariant: InvariantExpr = field(default_factory=default_invariant)
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SchemaDecl:
    funit: str
    locals: tuple[LocalTableDecl, ...] = ()
    inputs: tuple[InputTableDecl, ...] = ()
    outputs: tuple[OutputTableDecl, ...] = ()
    path: str = field(default="", compare=False)

    def tables(self) -> Iterator[TableDecl | OutputTableDecl]:
        yield from self.locals
        yield from self.inputs
        yield from self.outputs

    def local(self, name: str) -> LocalTableDecl | None:
        return next((t for t in self.locals if t.name.lower() == name.lower()), None)

    def input(self, name: str) -> InputTableDecl | None:
        return next((t for t in self.inputs if t.name.lower() == name.lower()), None)

    def output(self, name: str) -> OutputTableDecl | None:
        return next((t for t in self.outputs if t.name.lower() == name.lower()), None)

    def readable(self, name: str) -> TableDecl | None:
        """A local or input table, the tables this f-unit may read."""
        return self.local(name) or self.input(name)

    def foreign_keys(self) -> Iterator[tuple[LocalTableDecl, ForeignKeyDecl]]:
        for table in self.locals:
            for fk in table.foreign_keys:
                yield table, fk

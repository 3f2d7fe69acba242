"""Wirings (output table -> input table column matchings) and their file format.

    WIRE Groups.all_groups -> LiveSearch.data
      key   <- key
      text  <- name
      type  <- 'Group'
      owner <- owner
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Union

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedInput, VisitError

from src.errors import SchemaSyntaxError
from src.schema.parser import syntax_error, unquote

GRAMMAR = Path(__file__).with_name("wiring.lark")


@dataclass(frozen=True)
class SourceColumn:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ConstantValue:
    value: str

    def __str__(self) -> str:
        return "'" + self.value.replace("'", "''") + "'"


ColumnSource = Union[SourceColumn, ConstantValue]


@dataclass(frozen=True)
class WiringSpec:
    source_component: str
    source_table: str
    target_component: str
    target_table: str
    column_map: tuple[tuple[str, ColumnSource], ...] = ()
    line: int = field(default=0, compare=False)

    @property
    def name(self) -> str:
        return f"{self.source_component}.{self.source_table} -> {self.target_component}.{self.target_table}"

    def source_for(self, target_column: str) -> ColumnSource | None:
        for column, source in self.column_map:
            if column.lower() == target_column.lower():
                return source
        return None

    def to_text(self) -> str:
        width = max((len(c) for c, _ in self.column_map), default=0)
        lines = [f"WIRE {self.name}"]
        lines += [f"  {column.ljust(width)} <- {source}" for column, source in self.column_map]
        return "\n".join(lines)


@lru_cache(maxsize=None)
def _parser(start: str) -> Lark:
    return Lark(GRAMMAR.read_text(encoding="utf-8"), start=start, parser="lalr", propagate_positions=True)


class _WiringBuilder(Transformer):
    def endpoint(self, items):
        return str(items[0]), str(items[1])

    def column_source(self, items):
        return SourceColumn(str(items[0]))

    def constant_source(self, items):
        return ConstantValue(unquote(items[0]))

    def mapping(self, items):
        return str(items[0]), items[1]

    @v_args(meta=True)
    def wire(self, meta, items):
        (source_component, source_table), (target_component, target_table), *column_map = items
        return WiringSpec(source_component, source_table, target_component, target_table,
                          tuple(column_map), line=meta.line)

    def wiring_file(self, items):
        return list(items)

    def activation(self, items):
        return str(items[0]), str(items[1])

    def activations(self, items):
        return list(items)


def _run(text: str, start: str):
    try:
        return _WiringBuilder().transform(_parser(start).parse(text))
    except UnexpectedInput as e:
        raise syntax_error(e) from None
    except VisitError as e:
        if isinstance(e.orig_exc, SchemaSyntaxError):
            raise e.orig_exc from None
        raise


def parse_wirings(text: str) -> list[WiringSpec]:
    return _run(text, "wiring_file")


def parse_activations(text: str) -> list[tuple[str, str]]:
    """`Parent -> Child` lines."""
    return _run(text, "activations")

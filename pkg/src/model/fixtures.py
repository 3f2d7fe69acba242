"""Plain-text universe fixtures.

A fixture is a sequence of blocks separated by blank lines. Each block
declares one table::

    TABLE groups LOCAL Groups
    id | owner | src    | name
    g1 | alice | Groups | Chess

    TABLE data@bob INPUT LiveSearch bob
    id       | owner | src    | text
    d1       | alice | Groups | Chess

The header row names the columns; ``owner`` and ``src`` are mandatory,
``id`` is optional (rows are numbered per table when it is absent). Cells
are separated by ``|``; ``NULL`` or an empty cell is null, integers are
converted. Optional ``USERS a b`` and ``COMPONENTS x y`` lines declare
principals without data. ``#`` starts a comment line.
"""
from __future__ import annotations

import re
from pathlib import Path

from src.errors import SchemaSyntaxError
from src.model.universe import DataItem, Scalar, Universe, UniverseBuilder

TABLE_HEADER = re.compile(r"^TABLE\s+(?P<name>\S+)\s+(?P<kind>LOCAL|INPUT)\s+(?P<component>\S+)(?:\s+(?P<user>\S+))?\s*$")


def _cell(text: str) -> Scalar:
    text = text.strip()
    if text == "" or text.upper() == "NULL":
        return None
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    return text


def parse_fixture(text: str) -> Universe:
    builder = UniverseBuilder()
    lines = list(enumerate(text.splitlines(), start=1))
    blocks: list[list[tuple[int, str]]] = [[]]
    for number, line in lines:
        stripped = line.strip()
        if stripped.startswith("#"):
            continue
        if not stripped:
            if blocks[-1]:
                blocks.append([])
            continue
        blocks[-1].append((number, stripped))

    for block in filter(None, blocks):
        number, first = block[0]
        if first.startswith("USERS ") or first.startswith("COMPONENTS "):
            for number, line in block:
                keyword, *names = line.split()
                if keyword == "USERS":
                    builder.user(*names)
                elif keyword == "COMPONENTS":
                    builder.component(*names)
                else:
                    raise SchemaSyntaxError(f"unexpected line '{line}'", number, 1)
            continue

        match = TABLE_HEADER.match(first)
        if not match:
            raise SchemaSyntaxError(f"expected a TABLE header, got '{first}'", number, 1)
        table, component = match["name"], match["component"]
        if match["kind"] == "LOCAL":
            builder.local_table(component, table)
        else:
            if not match["user"]:
                raise SchemaSyntaxError("input table instances need a user", number, 1)
            builder.input_table(component, match["user"], table)

        if len(block) < 2:
            continue
        header_line, header = block[1]
        columns = [c.strip() for c in header.split("|")]
        for required in ("owner", "src"):
            if required not in columns:
                raise SchemaSyntaxError(f"table {table} lacks the mandatory '{required}' column", header_line, 1)

        for index, (number, line) in enumerate(block[2:], start=1):
            cells = [_cell(c) for c in line.split("|")]
            if len(cells) != len(columns):
                raise SchemaSyntaxError(f"row has {len(cells)} cells, expected {len(columns)}", number, 1)
            row = dict(zip(columns, cells))
            item_id = row.pop("id", None) or f"{table}#{index}"
            owner, src = row.pop("owner"), row.pop("src")
            if owner is None or src is None:
                raise SchemaSyntaxError("owner and src must not be null", number, 1)
            builder.item(table, DataItem.create(str(item_id), table, str(owner), str(src), values=row))
    return builder.build()


def load_fixture(path: str | Path) -> Universe:
    return parse_fixture(Path(path).read_text(encoding="utf-8"))

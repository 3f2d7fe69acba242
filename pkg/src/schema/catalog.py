"""Registry of integrated f-units and their declarations."""
from __future__ import annotations

import re
from typing import Iterable, Iterator

from src.schema.declarations import SchemaDecl

# Letters and digits, single underscores between them. Never `__`, so the
# prefixed storage name splits back into (component, table) unambiguously.
NAME_PATTERN = re.compile(r"^[A-Za-z][A-Za-z0-9]*(?:_[A-Za-z0-9]+)*$")

RESERVED_COLUMNS = ("src", "rowid", "oid", "_rowid_")


def valid_name(name: str) -> bool:
    return bool(NAME_PATTERN.match(name))


class Catalog:
    def __init__(self, decls: Iterable[SchemaDecl] = ()):
        self._decls: dict[str, SchemaDecl] = {}
        for decl in decls:
            self.add(decl)

    def add(self, decl: SchemaDecl) -> None:
        self._decls[decl.funit] = decl

    def remove(self, funit: str) -> SchemaDecl | None:
        return self._decls.pop(funit, None)

    def get(self, funit: str) -> SchemaDecl | None:
        return self._decls.get(funit)

    def find(self, funit: str) -> SchemaDecl | None:
        """Case-insensitive lookup; storage identifiers ignore case."""
        for name, decl in self._decls.items():
            if name.lower() == funit.lower():
                return decl
        return None

    def __contains__(self, funit: str) -> bool:
        return funit in self._decls

    def __iter__(self) -> Iterator[SchemaDecl]:
        return iter(self._decls[name] for name in sorted(self._decls))

    def __len__(self) -> int:
        return len(self._decls)

    @property
    def components(self) -> list[str]:
        return sorted(self._decls)

    def declaring(self, table: str) -> list[str]:
        """Components that declare a table of this name, in any kind."""
        return sorted(
            decl.funit for decl in self._decls.values()
            if any(t.name.lower() == table.lower() for t in decl.tables())
        )

    def copy(self) -> "Catalog":
        return Catalog(self._decls.values())

"""Foreign-key emulation across local and wired input tables.

Child rows always live in a local table. Their parent is a local table of
the same f-unit or one of its input tables; in the latter case the parent
keys are the namespaced keys of the unrestricted input view, so a child
survives as long as its parent exists anywhere upstream.

Deletions made here run in system context: they bypass the owner guard
and are logged at WARNING level.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

from sqlglot import exp

from src.errors import ConstraintViolation, ForeignKeyCycleError, WiringError
from src.sandbox.prefixing import PhysicalName
from src.sandbox.store import Store, quote, render
from src.schema.catalog import Catalog
from src.schema.declarations import LocalTableDecl, SchemaDecl, TableDecl
from src.schema.validator import foreign_key_cycles
from src.wiring.views import ViewCompiler

logger = logging.getLogger(__name__)

CHILD_ALIAS = "c"
PARENT_ALIAS = "p"


@dataclass(frozen=True)
class ForeignKey:
    component: str
    table: LocalTableDecl
    column: str
    parent: TableDecl
    parent_is_input: bool

    def __str__(self) -> str:
        kind = "input" if self.parent_is_input else "local"
        return f"{self.component}.{self.table.name}({self.column}) -> {self.parent.name} [{kind}]"


@dataclass(frozen=True)
class DeletedRow:
    component: str
    table: str
    key: str
    owner: str | None

    def __str__(self) -> str:
        return f"{self.component}.{self.table}/{self.key}"


def declare_foreign_keys(schema: SchemaDecl) -> list[ForeignKey]:
    """
    Resolves the foreign keys of `schema`.

    Raises:
        ForeignKeyCycleError: if the local parent/child relation has a cycle.
        WiringError: if a parent table is not readable by the f-unit.
    """
    cycles = foreign_key_cycles(schema)
    if cycles:
        raise ForeignKeyCycleError(f"foreign keys of {schema.funit} form a cycle: {cycles[0]}")
    declared = []
    for table, fk in schema.foreign_keys():
        parent = schema.readable(fk.parent_table)
        if parent is None:
            raise WiringError(f"{schema.funit}.{table.name} references unknown table '{fk.parent_table}'")
        declared.append(ForeignKey(schema.funit, table, fk.column, parent, schema.input(parent.name) is not None))
    return declared


def _text(node: exp.Expression) -> exp.Cast:
    return exp.Cast(this=node, to=exp.DataType.build("TEXT"))


class ForeignKeyEnforcer:
    """Reference checks, transitive cascades and the input-parent sweep."""

    def __init__(self, store: Store, catalog: Catalog, views: ViewCompiler):
        if views.restricted:
            raise ValueError("foreign keys resolve against unrestricted views")
        self.store = store
        self.catalog = catalog
        self.views = views

    def foreign_keys(self) -> list[ForeignKey]:
        return [fk for schema in self.catalog for fk in declare_foreign_keys(schema)]

    def _parent_source(self, fk: ForeignKey) -> exp.Expression:
        alias = exp.TableAlias(this=exp.to_identifier(PARENT_ALIAS, quoted=True))
        if fk.parent_is_input:
            return exp.Subquery(this=self.views.input_view(fk.component, fk.parent), alias=alias)
        return PhysicalName(fk.component, fk.parent.name).table(PARENT_ALIAS)

    def _orphaned(self, fk: ForeignKey) -> exp.Expression:
        """Non-NULL reference with no parent row; NULL parent keys match nothing."""
        key = _text(exp.column(fk.parent.key_column, table=PARENT_ALIAS, quoted=True))
        parent = exp.select(exp.Literal.number(1)).from_(self._parent_source(fk)).where(key.eq(self._reference(fk)))
        return exp.and_(
            exp.column(fk.column, table=CHILD_ALIAS, quoted=True).is_(exp.null()).not_(),
            exp.Exists(this=parent).not_(),
        )

    def check_references(self, component: str, table: LocalTableDecl, rows: list[dict]) -> None:
        """Raises ConstraintViolation for a non-NULL reference without a parent row."""
        for fk in self.foreign_keys():
            if fk.component != component or fk.table.name.lower() != table.name.lower():
                continue
            key = _text(exp.column(fk.parent.key_column, table=PARENT_ALIAS, quoted=True))
            lookup = exp.select(exp.Literal.number(1)).from_(self._parent_source(fk)).where(
                key.eq(exp.Placeholder(this="value"))
            ).limit(1)
            sql = render(lookup)
            for row in rows:
                value = row.get(fk.table.column(fk.column).name)
                if value is None:
                    continue
                if self.store.execute(sql, {"value": str(value)}).fetchone() is None:
                    raise ConstraintViolation(
                        f"{table.name}.{fk.column} = {value!r} references no row of {fk.parent.name}"
                    )

    def _delete_where(self, fk: ForeignKey, condition: exp.Expression, params: dict) -> list[DeletedRow]:
        child = PhysicalName(fk.component, fk.table.name)
        select = exp.select(
            exp.column("rowid", table=CHILD_ALIAS),
            exp.column(fk.table.key_column, table=CHILD_ALIAS, quoted=True),
            exp.column(fk.table.owner_column, table=CHILD_ALIAS, quoted=True),
        ).from_(child.table(CHILD_ALIAS)).where(condition)
        rows = self.store.execute(render(select), params).fetchall()
        deleted = []
        for rowid, key, owner in rows:
            self.store.execute(f"DELETE FROM {quote(child.physical)} WHERE rowid = ?", (rowid,))
            row = DeletedRow(fk.component, fk.table.name, str(key), owner)
            logger.warning(f"System-context delete of {row} (owner {owner}) via foreign key {fk}")
            deleted.append(row)
        return deleted

    def _reference(self, fk: ForeignKey) -> exp.Cast:
        return _text(exp.column(fk.column, table=CHILD_ALIAS, quoted=True))

    def cascade_on_delete(self, component: str, table: str, keys: list[str]) -> list[DeletedRow]:
        """
        Deletes, transitively, every local row that references one of `keys`
        in `component.table`.

        Returns:
            list[DeletedRow]: the child rows removed, parents first.
        """
        deleted: list[DeletedRow] = []
        frontier = [(table, [str(k) for k in keys])]
        local_keys = [fk for fk in self.foreign_keys() if fk.component == component and not fk.parent_is_input]
        while frontier:
            parent, parent_keys = frontier.pop(0)
            for fk in local_keys:
                if fk.parent.name.lower() != parent.lower():
                    continue
                removed = []
                for key in parent_keys:
                    removed += self._delete_where(fk, self._reference(fk).eq(exp.Placeholder(this="value")), {"value": key})
                if removed:
                    deleted += removed
                    frontier.append((fk.table.name, [r.key for r in removed]))
        return deleted

    def sweep(self) -> list[DeletedRow]:
        """
        Deletes children whose input-table parent no longer exists in the
        unrestricted union, with their local descendants. Repeats until a
        round deletes nothing, since each deletion can remove upstream rows
        of further input views.
        """
        deleted: list[DeletedRow] = []
        while True:
            removed = []
            for fk in self.foreign_keys():
                if not fk.parent_is_input:
                    continue
                rows = self._delete_where(fk, self._orphaned(fk), {})
                removed += rows
                if rows:
                    removed += self.cascade_on_delete(fk.component, fk.table.name, [r.key for r in rows])
            if not removed:
                return deleted
            deleted += removed

    def dangling(self) -> list[tuple[ForeignKey, str]]:
        """(foreign key, child key) for every reference without a parent row."""
        found = []
        for fk in self.foreign_keys():
            select = exp.select(exp.column(fk.table.key_column, table=CHILD_ALIAS, quoted=True)).from_(
                PhysicalName(fk.component, fk.table.name).table(CHILD_ALIAS)
            ).where(self._orphaned(fk))
            found += [(fk, str(row[0])) for row in self.store.execute(render(select)).fetchall()]
        return found

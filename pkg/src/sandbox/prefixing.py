"""Query sandbox: rewrite logical table names to the f-unit's storage names.

Rewriting happens on the syntax tree, never on text. Local tables map to
their physical table, input tables to their compiled view; every other
name is rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Protocol

from sqlglot import exp

from src.errors import PermissionDenied, UnknownTableError
from src.sandbox.query import QueryAst
from src.schema.declarations import InputTableDecl, SchemaDecl


@dataclass(frozen=True)
class PhysicalName:
    component: str
    logical: str

    @property
    def physical(self) -> str:
        return f"f_{self.component}__{self.logical}"

    def table(self, alias: str | None = None) -> exp.Table:
        return exp.Table(
            this=exp.to_identifier(self.physical, quoted=True),
            alias=exp.TableAlias(this=exp.to_identifier(alias or self.logical, quoted=True)),
        )


def physical_name(component: str, logical: str) -> str:
    return PhysicalName(component, logical).physical


class InputViews(Protocol):
    def input_view(self, component: str, table: InputTableDecl) -> exp.Select: ...


def rewrite_tables(tree: exp.Expression, resolve: Callable[[exp.Table], exp.Expression]) -> exp.Expression:
    """Returns a copy of `tree` with every table node replaced by `resolve(node)`."""
    tree = tree.copy()
    for table in list(tree.find_all(exp.Table)):
        table.replace(resolve(table))
    return tree


def source_resolver(schema: SchemaDecl, views: InputViews):
    """Resolves table nodes in the namespace of `schema.funit`."""

    def resolve(table: exp.Table) -> exp.Expression:
        alias = table.alias or None
        local = schema.local(table.name)
        if local is not None:
            return PhysicalName(schema.funit, local.name).table(alias or local.name)
        input_table = schema.input(table.name)
        if input_table is not None:
            return exp.Subquery(
                this=views.input_view(schema.funit, input_table),
                alias=exp.TableAlias(this=exp.to_identifier(alias or input_table.name, quoted=True)),
            )
        raise UnknownTableError(table.name, schema.funit)

    return resolve


def modified_table(ast: QueryAst) -> exp.Table | None:
    if isinstance(ast.tree, exp.Insert):
        return ast.tree.this.this
    if isinstance(ast.tree, (exp.Update, exp.Delete)):
        return ast.tree.this
    return None


def prefix_tables(schema: SchemaDecl, ast: QueryAst, views: InputViews) -> QueryAst:
    """
    Rewrites every table of `ast` for the f-unit `schema.funit`.

    Raises:
        UnknownTableError: for names that are not a local or input table of
            the f-unit, output tables included.
        PermissionDenied: when a modification targets an input table.
    """
    target = modified_table(ast)
    if target is not None:
        if schema.input(target.name) is not None:
            raise PermissionDenied(f"input table '{target.name}' of {schema.funit} is read-only")
        if schema.local(target.name) is None:
            raise UnknownTableError(target.name, schema.funit)
    tree = rewrite_tables(ast.tree, source_resolver(schema, views))
    sub_selects = [s for s in tree.find_all(exp.Select) if s.find_ancestor(exp.Select) is None] if target is not None else []
    return replace(ast, tree=tree, sub_selects=sub_selects)

"""Restricted output views and input-table union views.

Nothing is materialized: views are compiled into sub-queries of the
statement that reads them.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

from sqlglot import exp

from src.errors import WiringError
from src.sandbox.prefixing import PhysicalName, rewrite_tables, source_resolver
from src.sandbox.query import parse_query
from src.schema.catalog import Catalog
from src.schema.declarations import InputTableDecl, OutputTableDecl, SchemaDecl
from src.wiring.restriction import compile_restriction
from src.wiring.spec import ConstantValue, WiringSpec

logger = logging.getLogger(__name__)

ROW_ALIAS = "o"
BRANCH_ALIAS = "w"
SRC_COLUMN = "src"
MAX_DEPTH = 32


def _alias(name: str) -> exp.TableAlias:
    return exp.TableAlias(this=exp.to_identifier(name, quoted=True))


def key_namespaces(wirings: list[WiringSpec]) -> list[str]:
    """`Source:` for the first wiring of a source component, `Source#n:` for the n-th."""
    seen: Counter[str] = Counter()
    prefixes = []
    for spec in wirings:
        seen[spec.source_component] += 1
        n = seen[spec.source_component]
        prefixes.append(f"{spec.source_component}:" if n == 1 else f"{spec.source_component}#{n}:")
    return prefixes


@dataclass
class CompiledInputView:
    component: str
    table: InputTableDecl
    branches: list[tuple[WiringSpec, exp.Select]] = field(default_factory=list)

    @property
    def columns(self) -> list[str]:
        return [c.name for c in self.table.columns] + [SRC_COLUMN]

    def select(self) -> exp.Expression:
        if not self.branches:
            nulls = [exp.alias_(exp.null(), name, quoted=True) for name in self.columns]
            return exp.select(*nulls).where(exp.false())
        query = self.branches[0][1]
        for _, branch in self.branches[1:]:
            query = exp.union(query, branch, distinct=False)
        return query


class ViewCompiler:
    """
    Compiles views against a catalog and a wiring list.

    With `restricted=False` every output invariant is ignored; this is the
    unrestricted union used to decide whether a referenced row still exists.
    """

    def __init__(self, catalog: Catalog, wirings: list[WiringSpec], restricted: bool = True):
        self.catalog = catalog
        self.wirings = wirings
        self.restricted = restricted
        self._depth = 0

    def _schema(self, component: str) -> SchemaDecl:
        schema = self.catalog.get(component)
        if schema is None:
            raise WiringError(f"unknown f-unit '{component}'")
        return schema

    def wirings_into(self, component: str, table: str) -> list[WiringSpec]:
        return [
            w for w in self.wirings
            if w.target_component == component and w.target_table.lower() == table.lower()
        ]

    def predicate_source(self, schema: SchemaDecl, name: str) -> tuple[exp.Expression, list[str]]:
        local = schema.local(name)
        if local is not None:
            source = exp.Table(this=exp.to_identifier(PhysicalName(schema.funit, local.name).physical, quoted=True))
            return source, [c.name for c in local.data_columns]
        input_table = schema.input(name)
        if input_table is not None:
            return exp.Subquery(this=self.input_view(schema.funit, input_table)), [c.name for c in input_table.data_columns]
        raise WiringError(f"unknown predicate table '{name}' in {schema.funit}")

    def restricted_view(self, component: str, output: OutputTableDecl) -> exp.Select:
        """`SELECT * FROM (<prefixed output query>) AS o WHERE <invariant>`."""
        schema = self._schema(component)
        self._depth += 1
        try:
            if self._depth > MAX_DEPTH:
                raise WiringError(f"views nest deeper than {MAX_DEPTH} levels at {component}.{output.name}")
            query = rewrite_tables(parse_query(output.query).tree, source_resolver(schema, self))
            view = exp.select("*").from_(exp.Subquery(this=query, alias=_alias(ROW_ALIAS)))
            if self.restricted:
                condition = compile_restriction(
                    output.invariant, ROW_ALIAS, lambda name: self.predicate_source(schema, name)
                )
                view = view.where(condition)
            return view
        finally:
            self._depth -= 1

    def _branch(self, spec: WiringSpec, namespace: str, table: InputTableDecl) -> exp.Select:
        source = self._schema(spec.source_component)
        output = source.output(spec.source_table)
        if output is None:
            raise WiringError(f"{spec.source_component} has no output table '{spec.source_table}'")
        projections = []
        for column in table.columns:
            origin = spec.source_for(column.name)
            if origin is None:
                raise WiringError(f"{spec.name}: column '{column.name}' is not mapped")
            if column.type.name == "KEY":
                value = exp.DPipe(
                    this=exp.Literal.string(namespace),
                    expression=exp.Cast(
                        this=exp.column(origin.name, table=BRANCH_ALIAS, quoted=True),
                        to=exp.DataType.build("TEXT"),
                    ),
                )
            elif isinstance(origin, ConstantValue):
                numeric = column.type.is_numeric and origin.value.lstrip("-").isdigit()
                value = exp.Literal.number(int(origin.value)) if numeric else exp.Literal.string(origin.value)
            else:
                value = exp.column(origin.name, table=BRANCH_ALIAS, quoted=True)
            projections.append(exp.alias_(value, column.name, quoted=True))
        projections.append(exp.alias_(exp.Literal.string(spec.source_component), SRC_COLUMN, quoted=True))
        view = self.restricted_view(spec.source_component, output)
        return exp.select(*projections).from_(exp.Subquery(this=view, alias=_alias(BRANCH_ALIAS)))

    def compile_input_view(self, component: str, table: InputTableDecl) -> CompiledInputView:
        """One branch per wiring into `component.table`, bag-unioned."""
        specs = self.wirings_into(component, table.name)
        view = CompiledInputView(component, table)
        for spec, namespace in zip(specs, key_namespaces(specs)):
            view.branches.append((spec, self._branch(spec, namespace, table)))
        return view

    def input_view(self, component: str, table: InputTableDecl) -> exp.Expression:
        return self.compile_input_view(component, table).select()

"""Compiles invariants into SQL row conditions.

`@uid` becomes the named parameter `:uid`, bound per statement to the
session user. `is(a, b)` is NULL-safe equality; a table predicate
`t(x0, ..., xn)` becomes `EXISTS (SELECT 1 FROM t WHERE c0 = x0 AND ...)`
over the table's non-key columns in declaration order.
"""
from __future__ import annotations

from itertools import count
from typing import Callable

from sqlglot import exp

from src.errors import WiringError
from src.schema.invariant import All, And, Arg, ColumnRef, InvariantExpr, Is, Or, Pred, Uid

UID_PARAMETER = "uid"

PredicateSource = Callable[[str], "tuple[exp.Expression, list[str]]"]


def uid_placeholder() -> exp.Placeholder:
    return exp.Placeholder(this=UID_PARAMETER)


def _arg(arg: Arg, row_alias: str) -> exp.Expression:
    if isinstance(arg, Uid):
        return uid_placeholder()
    if isinstance(arg, ColumnRef):
        return exp.column(arg.name, table=row_alias, quoted=True)
    if isinstance(arg.value, int):
        return exp.Literal.number(arg.value)
    return exp.Literal.string(arg.value)


def compile_restriction(inv: InvariantExpr, row_alias: str, predicate_source: PredicateSource) -> exp.Expression:
    """
    Args:
        inv: the invariant of an output table.
        row_alias: alias of the output rows the condition filters.
        predicate_source: maps a predicate table name to an unaliased
            source expression and its predicate columns.

    Returns:
        exp.Expression: a condition over `row_alias` and `:uid`.
    """
    aliases = count()

    def compile_node(node: InvariantExpr) -> exp.Expression:
        if isinstance(node, All):
            return exp.true()
        if isinstance(node, Is):
            return exp.Is(this=_arg(node.left, row_alias), expression=_arg(node.right, row_alias))
        if isinstance(node, Pred):
            source, columns = predicate_source(node.table)
            if len(columns) != len(node.args):
                raise WiringError(f"predicate {node.table} takes {len(columns)} arguments, got {len(node.args)}")
            alias = f"p{next(aliases)}"
            source = source.copy()
            source.set("alias", exp.TableAlias(this=exp.to_identifier(alias, quoted=True)))
            matches = [
                exp.EQ(this=exp.column(column, table=alias, quoted=True), expression=_arg(arg, row_alias))
                for column, arg in zip(columns, node.args)
            ]
            related = exp.select(exp.Literal.number(1)).from_(source)
            if matches:
                related = related.where(exp.and_(*matches))
            exists = exp.Exists(this=related)
            return exp.Not(this=exists) if node.negated else exists
        if isinstance(node, (And, Or)):
            kind = exp.And if isinstance(node, And) else exp.Or
            return kind(this=exp.Paren(this=compile_node(node.left)), expression=exp.Paren(this=compile_node(node.right)))
        raise WiringError(f"unsupported invariant node {node!r}")

    return compile_node(inv)

"""Parsing and classification of the supported SQL subset.

Statements are read with the MySQL dialect. Exactly one statement per
call; anything outside the subset raises `UnsupportedConstructError`
rather than being passed through.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import sqlglot
from sqlglot import exp
from sqlglot.errors import ParseError, TokenError

from src.errors import QuerySyntaxError, UnsupportedConstructError
from src.model.universe import Op

READ_DIALECT = "mysql"

ALLOWED_FUNCTIONS = (
    exp.Lower,
    exp.Upper,
    exp.Concat,
    exp.Length,
    exp.Coalesce,
    exp.Count,
    exp.Trim,
    exp.Substring,
    exp.Abs,
    exp.Cast,
    exp.Exists,
)

FORBIDDEN_NODES = {
    exp.With: "common table expressions",
    exp.Union: "set operations",
    exp.Intersect: "set operations",
    exp.Except: "set operations",
    exp.Group: "GROUP BY",
    exp.Having: "HAVING",
    exp.Window: "window functions",
    exp.Placeholder: "placeholders",
    exp.Parameter: "session variables",
    exp.SessionParameter: "session variables",
    exp.Into: "SELECT INTO",
    exp.Lateral: "LATERAL",
}


@dataclass
class QueryAst:
    """A parsed statement with its operation class and logical table names."""

    op: Op
    tree: exp.Expression
    tables: tuple[str, ...]
    target: str | None = None
    sub_selects: list[exp.Select] = field(default_factory=list)
    text: str = ""

    @property
    def where(self) -> exp.Expression | None:
        node = self.tree.args.get("where")
        return node.this if node is not None else None

    def sub_select_tables(self) -> tuple[str, ...]:
        return _table_names(self.sub_selects)

    def insert_columns(self) -> list[str]:
        return [c.name for c in self.tree.this.expressions]

    def insert_rows(self) -> list[list[exp.Expression]]:
        return [list(row.expressions) for row in self.tree.expression.expressions]

    def assignments(self) -> list[tuple[str, exp.Expression]]:
        return [(a.this.name, a.expression) for a in self.tree.expressions]


def _table_names(nodes) -> tuple[str, ...]:
    names: list[str] = []
    for node in nodes:
        for table in node.find_all(exp.Table):
            if table.name not in names:
                names.append(table.name)
    return tuple(names)


def check_subset(tree: exp.Expression) -> None:
    """Raises for every construct outside the supported subset."""
    for node in tree.walk():
        for kind, label in FORBIDDEN_NODES.items():
            if isinstance(node, kind):
                raise UnsupportedConstructError(f"unsupported construct: {label}")
        if isinstance(node, exp.Func) and not isinstance(node, ALLOWED_FUNCTIONS):
            name = node.name if isinstance(node, exp.Anonymous) else node.sql_name()
            raise UnsupportedConstructError(f"unsupported function: {name}")
        if isinstance(node, exp.Table):
            if node.args.get("db") or node.args.get("catalog"):
                raise UnsupportedConstructError(f"qualified table names are not supported: {node.sql(READ_DIALECT)}")
            if not isinstance(node.this, exp.Identifier):
                raise UnsupportedConstructError("table functions are not supported")
        if isinstance(node, exp.Column) and (node.args.get("db") or node.args.get("catalog")):
            raise UnsupportedConstructError(f"qualified column names are not supported: {node.sql(READ_DIALECT)}")


def _outermost_selects(tree: exp.Expression) -> list[exp.Select]:
    return [s for s in tree.find_all(exp.Select) if s.find_ancestor(exp.Select) is None]


def _check_target_only(ast: QueryAst) -> None:
    """A modification's WHERE and SET expressions may name only the target table."""
    target = ast.target.lower()
    scopes = [ast.where] + [value for _, value in ast.assignments()] if ast.op is Op.UPD else [ast.where]
    for scope in filter(None, scopes):
        for column in scope.find_all(exp.Column):
            if column.find_ancestor(exp.Select) is not None:
                continue
            if column.table and column.table.lower() != target:
                raise UnsupportedConstructError(
                    f"column {column.sql(READ_DIALECT)} does not belong to the modified table {ast.target}"
                )


def _classify(tree: exp.Expression, text: str) -> QueryAst:
    if isinstance(tree, exp.Select):
        return QueryAst(Op.SEL, tree, _table_names([tree]), text=text)

    if isinstance(tree, exp.Insert):
        if tree.args.get("conflict") or tree.args.get("returning"):
            raise UnsupportedConstructError("INSERT extensions are not supported")
        if not isinstance(tree.this, exp.Schema):
            raise UnsupportedConstructError("INSERT needs an explicit column list")
        if not isinstance(tree.expression, exp.Values):
            raise UnsupportedConstructError("INSERT supports VALUES only")
        target = tree.this.this.name
        width = len(tree.this.expressions)
        for row in tree.expression.expressions:
            if len(row.expressions) != width:
                raise QuerySyntaxError(f"VALUES row has {len(row.expressions)} values, expected {width}")
        op = Op.INS

    elif isinstance(tree, exp.Update):
        if tree.args.get("from") or tree.args.get("joins") or not isinstance(tree.this, exp.Table):
            raise UnsupportedConstructError("UPDATE of more than one table is not supported")
        if tree.args.get("order") or tree.args.get("limit"):
            raise UnsupportedConstructError("UPDATE with ORDER BY or LIMIT is not supported")
        target = tree.this.name
        op = Op.UPD

    elif isinstance(tree, exp.Delete):
        if tree.args.get("using") or tree.args.get("tables") or not isinstance(tree.this, exp.Table):
            raise UnsupportedConstructError("DELETE from more than one table is not supported")
        if tree.args.get("order") or tree.args.get("limit"):
            raise UnsupportedConstructError("DELETE with ORDER BY or LIMIT is not supported")
        target = tree.this.name
        op = Op.DEL

    else:
        raise UnsupportedConstructError(f"unsupported statement: {tree.key.upper()}")

    sub_selects = _outermost_selects(tree)
    tables = (target,) + tuple(t for t in _table_names(sub_selects) if t != target)
    ast = QueryAst(op, tree, tables, target=target, sub_selects=sub_selects, text=text)
    if op is not Op.INS:
        _check_target_only(ast)
    return ast


def parse_query(text: str) -> QueryAst:
    """
    Parses one statement of the SQL subset.

    Args:
        text: the statement text.

    Returns:
        QueryAst: the classified statement. Sub-selects of modifications
            are collected in `sub_selects` and are read under the rules for
            SEL.
    """
    try:
        statements = [s for s in sqlglot.parse(text, read=READ_DIALECT) if s is not None]
    except (ParseError, TokenError) as e:
        raise QuerySyntaxError(str(e).splitlines()[0]) from None
    if len(statements) != 1:
        raise QuerySyntaxError(f"expected exactly one statement, got {len(statements)}")
    tree = statements[0]
    if isinstance(tree, exp.Command):
        raise UnsupportedConstructError(f"unsupported statement: {tree.name}")
    check_subset(tree)
    return _classify(tree, text)


def projection_names(select: exp.Select) -> list[str]:
    """Output column names of a SELECT; raises for unnamed projections."""
    names = []
    for projection in select.expressions:
        if isinstance(projection, exp.Star) or (isinstance(projection, exp.Column) and isinstance(projection.this, exp.Star)):
            raise UnsupportedConstructError("projection must name its columns")
        name = projection.alias_or_name
        if not name:
            raise UnsupportedConstructError(f"projection {projection.sql(READ_DIALECT)} needs an alias")
        names.append(name)
    return names

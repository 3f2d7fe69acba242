"""Validation of parsed declarations and output-table signatures."""
from __future__ import annotations

from dataclasses import dataclass

from sqlglot import exp

from src.errors import MonitorError, SignatureError
from src.model.universe import Op
from src.schema.catalog import RESERVED_COLUMNS, Catalog, valid_name
from src.schema.declarations import INT, TEXT, OutputTableDecl, SchemaDecl, SqlType, TableDecl
from src.schema.invariant import KEY_COLUMN, OWNER_COLUMN, predicates, referenced_columns

Signature = list[tuple[str, SqlType]]

NUMERIC_CASTS = {"INT", "INTEGER", "BIGINT", "SMALLINT", "TINYINT", "SIGNED", "UNSIGNED", "DECIMAL"}


@dataclass(frozen=True)
class Diagnostic:
    message: str
    line: int = 0
    column: int = 0
    path: str = ""

    def __str__(self) -> str:
        return f"{self.path or '<input>'}:{self.line}:{self.column}: {self.message}"


def _from_scope(select: exp.Select, schema: SchemaDecl) -> dict[str, TableDecl]:
    scope: dict[str, TableDecl] = {}
    for table in select.find_all(exp.Table):
        decl = schema.readable(table.name)
        if decl is None:
            raise SignatureError(f"table '{table.name}' is not readable by {schema.funit}")
        scope[(table.alias_or_name).lower()] = decl
    return scope


def _column_type(column: exp.Column, scope: dict[str, TableDecl]) -> SqlType:
    if column.table:
        table = scope.get(column.table.lower())
        if table is None:
            raise SignatureError(f"unknown table qualifier '{column.table}'")
        candidates = [table]
    else:
        candidates = [t for t in scope.values() if t.column(column.name) is not None]
    if not candidates or candidates[0].column(column.name) is None:
        raise SignatureError(f"unknown column '{column.sql()}'")
    if len({id(t) for t in candidates}) > 1:
        raise SignatureError(f"ambiguous column '{column.name}'")
    return candidates[0].column(column.name).type


def _infer(node: exp.Expression, scope: dict[str, TableDecl]) -> SqlType:
    if isinstance(node, (exp.Alias, exp.Paren)):
        return _infer(node.this, scope)
    if isinstance(node, exp.Column):
        return _column_type(node, scope)
    if isinstance(node, exp.Literal):
        if node.is_string:
            return TEXT
        return INT if node.this.lstrip("-").isdigit() else TEXT
    if isinstance(node, exp.Null):
        return TEXT
    if isinstance(node, (exp.Boolean, exp.Predicate, exp.Connector, exp.Not, exp.Length, exp.Count)):
        return INT
    if isinstance(node, (exp.Concat, exp.Lower, exp.Upper, exp.Trim, exp.Substring)):
        return TEXT
    if isinstance(node, exp.Coalesce):
        return _infer(node.this, scope)
    if isinstance(node, exp.Cast):
        return INT if node.to.this.name.upper() in NUMERIC_CASTS else TEXT
    if isinstance(node, (exp.Abs, exp.Neg)):
        inner = _infer(node.this, scope)
        if not inner.is_numeric:
            raise SignatureError(f"numeric operation over {inner} in '{node.sql()}'")
        return INT
    if isinstance(node, (exp.Add, exp.Sub, exp.Mul, exp.Div, exp.Mod)):
        return INT
    raise SignatureError(f"cannot infer the type of '{node.sql()}'")


def output_select(decl: OutputTableDecl) -> exp.Select:
    # local import: the sandbox package depends on this one
    from src.sandbox.query import parse_query

    ast = parse_query(decl.query)
    if ast.op is not Op.SEL:
        raise SignatureError(f"output table {decl.name} must be defined by a SELECT")
    return ast.tree


def output_signature(decl: OutputTableDecl, catalog: Catalog, funit: str) -> Signature:
    """
    Derives the column names and types of an output table.

    Args:
        decl: the output table.
        catalog: integrated f-units, including `funit`.
        funit: the declaring f-unit.

    Returns:
        Signature: (alias, type) pairs in projection order. KEY and OWNER
            markers carry through plain column references.
    """
    from src.sandbox.query import projection_names

    schema = catalog.get(funit)
    if schema is None:
        raise SignatureError(f"f-unit '{funit}' is not in the catalog")
    select = output_select(decl)
    scope = _from_scope(select, schema)
    try:
        names = projection_names(select)
    except MonitorError as e:
        raise SignatureError(str(e)) from None
    return [(name, _infer(projection, scope)) for name, projection in zip(names, select.expressions)]


def table_signature(table: TableDecl) -> Signature:
    return [(c.name, c.type) for c in table.columns]


def foreign_key_cycles(schema: SchemaDecl) -> list[str]:
    edges = {t.name.lower(): {fk.parent_table.lower() for fk in t.foreign_keys} for t in schema.locals}
    cycles, state = [], {}

    def visit(node: str, path: list[str]) -> None:
        state[node] = "open"
        for parent in sorted(edges.get(node, ())):
            if state.get(parent) == "open":
                cycles.append(" -> ".join(path[path.index(parent):] + [parent]) if parent in path else parent)
            elif parent not in state:
                visit(parent, path + [parent])
        state[node] = "done"

    for node in sorted(edges):
        if node not in state:
            visit(node, [node])
    return cycles


def _validate_table(schema: SchemaDecl, table: TableDecl, diagnostics: list[Diagnostic]) -> None:
    def report(message: str) -> None:
        diagnostics.append(Diagnostic(message, table.line, 1, schema.path))

    if not valid_name(table.name):
        report(f"invalid table name '{table.name}'")
    for column in table.columns:
        if not valid_name(column.name):
            report(f"invalid column name '{column.name}' in table {table.name}")
        if column.name.lower() in RESERVED_COLUMNS:
            report(f"column name '{column.name}' is reserved")
    for marker in ("KEY", "OWNER"):
        count = len(table.marker_columns(marker))
        if count != 1:
            report(f"table {table.name} must declare exactly one {marker} column, found {count}")

    for fk in getattr(table, "foreign_keys", ()):
        column = table.column(fk.column)
        if column is None:
            report(f"foreign key column '{fk.column}' is not a column of {table.name}")
        elif column.type.name == "KEY":
            report(f"foreign key column '{fk.column}' cannot be the KEY column")
        parent = schema.readable(fk.parent_table)
        if parent is None:
            report(f"foreign key of {table.name} references unknown table '{fk.parent_table}'")
        elif parent.marker_columns("KEY") and parent.key_column.lower() != fk.parent_column.lower():
            report(f"foreign key of {table.name} must reference the KEY column of {parent.name}")


def _validate_output(schema: SchemaDecl, catalog: Catalog, decl: OutputTableDecl,
                     diagnostics: list[Diagnostic]) -> None:
    from src.sandbox.query import projection_names

    def report(message: str) -> None:
        diagnostics.append(Diagnostic(message, decl.line, 1, schema.path))

    if not valid_name(decl.name):
        report(f"invalid table name '{decl.name}'")
    try:
        select = output_select(decl)
    except MonitorError as e:
        report(f"output table {decl.name}: {e}")
        return

    if any(s is not select for s in select.find_all(exp.Select)):
        report(f"output table {decl.name} may not contain nested SELECTs")
    for table in select.find_all(exp.Table):
        if schema.readable(table.name) is not None:
            continue
        if schema.output(table.name) is not None:
            report(f"output table {decl.name} reads output table '{table.name}'; only local and input tables are allowed")
            continue
        owners = [c for c in catalog.declaring(table.name) if c != schema.funit]
        where = f" (declared by {', '.join(owners)})" if owners else ""
        report(f"output table {decl.name} references '{table.name}' outside {schema.funit}{where}")

    try:
        names = projection_names(select)
    except MonitorError as e:
        report(f"output table {decl.name}: {e}")
        return
    lowered = [n.lower() for n in names]
    for duplicate in sorted({n for n in lowered if lowered.count(n) > 1}):
        report(f"output table {decl.name} projects '{duplicate}' more than once")
    for required in (KEY_COLUMN, OWNER_COLUMN):
        if required not in lowered:
            report(f"output table {decl.name} must project a column aliased '{required}'")

    for column in sorted(referenced_columns(decl.invariant)):
        if column.lower() not in lowered:
            report(f"invariant of {decl.name} references unresolved column '{column}'")
    for pred in predicates(decl.invariant):
        table = schema.readable(pred.table)
        if table is None:
            report(f"invariant of {decl.name} uses unknown predicate table '{pred.table}'")
        elif len(pred.args) != len(table.data_columns):
            report(
                f"predicate {pred.table} takes {len(table.data_columns)} arguments, "
                f"got {len(pred.args)} in the invariant of {decl.name}"
            )


def validate_schema(decl: SchemaDecl, catalog: Catalog) -> list[Diagnostic]:
    """
    Checks a declaration against the rules of the `.db` dialect and the
    already integrated f-units. Returns diagnostics, never raises.
    """
    diagnostics: list[Diagnostic] = []
    if not valid_name(decl.funit):
        diagnostics.append(Diagnostic(f"invalid f-unit name '{decl.funit}'", path=decl.path))
    clash = catalog.find(decl.funit)
    if clash is not None and clash.funit != decl.funit:
        diagnostics.append(Diagnostic(f"f-unit '{decl.funit}' collides with '{clash.funit}'", path=decl.path))

    seen: set[str] = set()
    for table in decl.tables():
        if table.name.lower() in seen:
            diagnostics.append(Diagnostic(f"duplicate table '{table.name}'", table.line, 1, decl.path))
        seen.add(table.name.lower())

    for table in (*decl.locals, *decl.inputs):
        _validate_table(decl, table, diagnostics)
    for cycle in foreign_key_cycles(decl):
        diagnostics.append(Diagnostic(f"foreign keys form a cycle: {cycle}", path=decl.path))

    scoped = catalog.copy()
    scoped.add(decl)
    for output in decl.outputs:
        _validate_output(decl, scoped, output, diagnostics)
        if not any(d.line == output.line and d.path == decl.path for d in diagnostics):
            try:
                output_signature(output, scoped, decl.funit)
            except MonitorError as e:
                diagnostics.append(Diagnostic(f"output table {output.name}: {e}", output.line, 1, decl.path))
    return diagnostics

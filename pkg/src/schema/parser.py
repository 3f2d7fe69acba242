"""Parser for `.db` files and invariant expressions."""
from __future__ import annotations

import logging
from functools import lru_cache
from pathlib import Path

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken, VisitError

from src.errors import InvariantSyntaxError, SchemaSyntaxError
from src.schema.declarations import (
    TYPE_NAMES,
    Column,
    ForeignKeyDecl,
    InputTableDecl,
    LocalTableDecl,
    OutputTableDecl,
    SchemaDecl,
    SqlType,
    TableDecl,
)
from src.schema.invariant import (
    All,
    And,
    ColumnRef,
    Constant,
    InvariantExpr,
    Is,
    Or,
    Pred,
    Uid,
    default_invariant,
    to_text,
)

logger = logging.getLogger(__name__)

GRAMMAR = Path(__file__).with_name("schema.lark")


@lru_cache(maxsize=None)
def _parser(start: str) -> Lark:
    return Lark(
        GRAMMAR.read_text(encoding="utf-8"),
        start=start,
        parser="lalr",
        lexer="contextual",
        propagate_positions=True,
        maybe_placeholders=True,
    )


def unquote(token: str) -> str:
    body = token[1:-1]
    return body.replace("''", "'").replace("\\'", "'")


class _InvariantBuilder(Transformer):
    def invariant(self, items):
        return items[0]

    def disjunction(self, items):
        expr = items[0]
        for right in items[1:]:
            expr = Or(expr, right)
        return expr

    def conjunction(self, items):
        expr = items[0]
        for right in items[1:]:
            expr = And(expr, right)
        return expr

    def all_expr(self, _):
        return All()

    @v_args(meta=True)
    def negated(self, meta, items):
        (pred,) = items
        if not isinstance(pred, Pred):
            raise InvariantSyntaxError("negation is only allowed on table predicates", meta.line, meta.column)
        return Pred(pred.table, pred.args, negated=True)

    @v_args(meta=True)
    def predicate(self, meta, items):
        name, *args = items
        args = tuple(a for a in args if a is not None)
        if str(name) == "is":
            if len(args) != 2:
                raise InvariantSyntaxError(f"is() takes 2 arguments, got {len(args)}", meta.line, meta.column)
            return Is(*args)
        return Pred(str(name), args)

    def uid_arg(self, _):
        return Uid()

    def column_arg(self, items):
        return ColumnRef(str(items[0]))

    def string_arg(self, items):
        return Constant(unquote(items[0]))

    def number_arg(self, items):
        return Constant(int(items[0]))


class _SchemaBuilder(_InvariantBuilder):
    def __init__(self, text: str, funit: str):
        super().__init__()
        self.text = text
        self.funit = funit

    def type_length(self, items):
        return int(items[0])

    @v_args(meta=True)
    def column(self, meta, items):
        name, type_name, *length = items
        length = length[0] if length else None
        type_name = str(type_name).upper()
        if type_name not in TYPE_NAMES:
            raise SchemaSyntaxError(f"unknown column type '{type_name}'", meta.line, meta.column)
        if type_name == "VARCHAR" and length is None:
            raise SchemaSyntaxError("VARCHAR needs a length", meta.line, meta.column)
        if type_name != "VARCHAR" and length is not None:
            raise SchemaSyntaxError(f"type {type_name} takes no length", meta.line, meta.column)
        return Column(str(name), SqlType(type_name, length))

    @v_args(meta=True)
    def foreign_key(self, meta, items):
        column, parent, parent_column = (str(i) for i in items)
        return ForeignKeyDecl(column, parent, parent_column, line=meta.line)

    @v_args(meta=True)
    def query(self, meta, _):
        return self.text[meta.start_pos:meta.end_pos].strip()

    def sql_group(self, _):
        return None

    def invariant_clause(self, items):
        return items[0]

    @staticmethod
    def _columns(meta, name: str, items) -> tuple[tuple[Column, ...], tuple[ForeignKeyDecl, ...]]:
        columns = tuple(i for i in items if isinstance(i, Column))
        foreign_keys = tuple(i for i in items if isinstance(i, ForeignKeyDecl))
        seen = set()
        for column in columns:
            if column.name.lower() in seen:
                raise SchemaSyntaxError(f"duplicate column '{column.name}' in table {name}", meta.line, meta.column)
            seen.add(column.name.lower())
        for marker in ("KEY", "OWNER"):
            count = sum(1 for c in columns if c.type.name == marker)
            if count != 1:
                raise SchemaSyntaxError(
                    f"table {name} must declare exactly one {marker} column, found {count}", meta.line, meta.column
                )
        return columns, foreign_keys

    @v_args(meta=True)
    def table_decl(self, meta, items):
        name, *rest = items
        columns, foreign_keys = self._columns(meta, str(name), rest)
        return LocalTableDecl(str(name), columns, line=meta.line, foreign_keys=foreign_keys)

    @v_args(meta=True)
    def input_decl(self, meta, items):
        name, *rest = items
        columns, foreign_keys = self._columns(meta, str(name), rest)
        if foreign_keys:
            raise SchemaSyntaxError(f"input table {name} cannot declare foreign keys", meta.line, meta.column)
        return InputTableDecl(str(name), columns, line=meta.line)

    @v_args(meta=True)
    def output_decl(self, meta, items):
        name, query, invariant = (list(items) + [None])[:3]
        return OutputTableDecl(str(name), query, invariant or default_invariant(), line=meta.line)

    def db_file(self, decls):
        seen: dict[str, int] = {}
        for decl in decls:
            key = decl.name.lower()
            if key in seen:
                raise SchemaSyntaxError(
                    f"duplicate table '{decl.name}' (first declared on line {seen[key]})", decl.line, 1
                )
            seen[key] = decl.line
        return SchemaDecl(
            funit=self.funit,
            locals=tuple(d for d in decls if isinstance(d, LocalTableDecl)),
            inputs=tuple(d for d in decls if isinstance(d, InputTableDecl)),
            outputs=tuple(d for d in decls if isinstance(d, OutputTableDecl)),
        )


def syntax_error(error: UnexpectedInput, cls=SchemaSyntaxError) -> SchemaSyntaxError:
    if isinstance(error, UnexpectedEOF):
        message = "unexpected end of input"
    elif isinstance(error, UnexpectedToken):
        message = "unexpected end of input" if error.token.type == "$END" else f"unexpected '{error.token}'"
    elif isinstance(error, UnexpectedCharacters):
        message = f"unexpected character '{error.char}'"
    else:
        message = str(error)
    line = getattr(error, "line", 0)
    column = getattr(error, "column", 0)
    return cls(message, line if isinstance(line, int) and line > 0 else 0,
               column if isinstance(column, int) and column > 0 else 0)


def _run(text: str, start: str, builder: Transformer, cls):
    try:
        tree = _parser(start).parse(text)
        return builder.transform(tree)
    except UnexpectedInput as e:
        raise syntax_error(e, cls) from None
    except VisitError as e:
        if isinstance(e.orig_exc, SchemaSyntaxError):
            raise e.orig_exc from None
        raise


def parse_db_file(text: str, funit: str = "") -> SchemaDecl:
    """
    Parses the text of a `.db` file.

    Args:
        text: the file contents.
        funit: name of the declaring f-unit.

    Returns:
        SchemaDecl: the declared local, input and output tables. Output
            tables without an INVARIANT clause get the owner-only default.
    """
    return _run(text, "db_file", _SchemaBuilder(text, funit), SchemaSyntaxError)


def load_db_file(path: str | Path, funit: str | None = None) -> SchemaDecl:
    path = Path(path)
    decl = parse_db_file(path.read_text(encoding="utf-8"), funit or path.stem)
    logger.debug(f"Parsed {path}: {len(decl.locals)} local, {len(decl.inputs)} input, {len(decl.outputs)} output")
    return SchemaDecl(decl.funit, decl.locals, decl.inputs, decl.outputs, path=str(path))


def parse_invariant(text: str) -> InvariantExpr:
    return _run(text, "invariant", _InvariantBuilder(), InvariantSyntaxError)


def _serialize_table(keyword: str, table: TableDecl) -> str:
    items = [f"    {c.name} {c.type}" for c in table.columns]
    for fk in getattr(table, "foreign_keys", ()):
        items.append(f"    FOREIGN KEY ({fk.column}) REFERENCES {fk.parent_table}({fk.parent_column})")
    body = ",\n".join(items)
    return f"{keyword} {table.name} (\n{body}\n);"


def serialize(decl: SchemaDecl) -> str:
    """Renders a declaration back to `.db` text."""
    blocks = [_serialize_table("TABLE", t) for t in decl.locals]
    blocks += [_serialize_table("INPUT TABLE", t) for t in decl.inputs]
    for output in decl.outputs:
        blocks.append(f"OUTPUT TABLE {output.name} = {output.query}\n    INVARIANT {to_text(output.invariant)};")
    return "\n\n".join(blocks) + ("\n" if blocks else "")

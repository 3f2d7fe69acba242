"""Invariant expressions guarding output tables.

    inv  := ALL | is(arg, arg) | [!]table(arg, ...) | inv AND inv | inv OR inv
    arg  := @uid | column | 'text' | 123

AND binds tighter than OR; both associate to the left. Negation is only
allowed on table predicates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union


@dataclass(frozen=True)
class Uid:
    def __str__(self) -> str:
        return "@uid"


@dataclass(frozen=True)
class ColumnRef:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Constant:
    value: Union[str, int]

    def __str__(self) -> str:
        if isinstance(self.value, int):
            return str(self.value)
        return "'" + self.value.replace("'", "''") + "'"


Arg = Union[Uid, ColumnRef, Constant]


@dataclass(frozen=True)
class All:
    pass


@dataclass(frozen=True)
class Is:
    left: Arg
    right: Arg


@dataclass(frozen=True)
class Pred:
    table: str
    args: tuple[Arg, ...]
    negated: bool = False


@dataclass(frozen=True)
class And:
    left: "InvariantExpr"
    right: "InvariantExpr"


@dataclass(frozen=True)
class Or:
    left: "InvariantExpr"
    right: "InvariantExpr"


InvariantExpr = Union[All, Is, Pred, And, Or]

OWNER_COLUMN = "owner"
KEY_COLUMN = "key"


def default_invariant() -> InvariantExpr:
    """Rows are visible to their owner only."""
    return Is(Uid(), ColumnRef(OWNER_COLUMN))


def _precedence(node: InvariantExpr) -> int:
    if isinstance(node, Or):
        return 1
    if isinstance(node, And):
        return 2
    return 3


def to_text(node: InvariantExpr, parent: int = 0, right_operand: bool = False) -> str:
    """Renders an invariant so that parsing the text yields the same tree."""
    prec = _precedence(node)
    if isinstance(node, All):
        text = "ALL"
    elif isinstance(node, Is):
        text = f"is({node.left},{node.right})"
    elif isinstance(node, Pred):
        args = ",".join(str(a) for a in node.args)
        text = f"{'!' if node.negated else ''}{node.table}({args})"
    else:
        keyword = "OR" if isinstance(node, Or) else "AND"
        text = f"{to_text(node.left, prec)} {keyword} {to_text(node.right, prec, right_operand=True)}"
    if prec < parent or (prec == parent and right_operand and prec < 3):
        return f"({text})"
    return text


def walk(node: InvariantExpr) -> Iterator[InvariantExpr]:
    yield node
    if isinstance(node, (And, Or)):
        yield from walk(node.left)
        yield from walk(node.right)


def referenced_columns(node: InvariantExpr) -> set[str]:
    columns = set()
    for sub in walk(node):
        args: tuple[Arg, ...] = ()
        if isinstance(sub, Is):
            args = (sub.left, sub.right)
        elif isinstance(sub, Pred):
            args = sub.args
        columns.update(a.name for a in args if isinstance(a, ColumnRef))
    return columns


def predicates(node: InvariantExpr) -> list[Pred]:
    return [sub for sub in walk(node) if isinstance(sub, Pred)]

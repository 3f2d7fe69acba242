"""Principals, data items, universes and requests of the formal model.

The model is n-dimensional: a universe carries an ordered list of
principal dimensions. The ecosystem instantiation uses exactly two,
``users`` and ``components``; further dimensions are supported by the
oracle only and share data through explicit grants.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Union

from src.errors import DimensionError

Scalar = Union[str, int, float, None]

USERS = "users"
COMPONENTS = "components"


class Op(str, enum.Enum):
    SEL = "SEL"
    INS = "INS"
    UPD = "UPD"
    DEL = "DEL"

    @property
    def modifying(self) -> bool:
        return self is not Op.SEL


@dataclass(frozen=True)
class Dimension:
    name: str
    principals: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "principals", frozenset(self.principals))

    def __contains__(self, principal_id: str) -> bool:
        return principal_id in self.principals


@dataclass(frozen=True)
class Principal:
    dimension: str
    id: str


@dataclass(frozen=True)
class DataItem:
    """One row with its provenance in every principal dimension."""

    id: str
    home_table: str
    owner: str
    src: str
    values: tuple[tuple[str, Scalar], ...] = ()
    extra: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.owner is None or self.owner == "":
            raise ValueError(f"data item {self.id} has no owner")
        if self.src is None or self.src == "":
            raise ValueError(f"data item {self.id} has no src")

    @classmethod
    def create(cls, id: str, home_table: str, owner: str, src: str,
               values: Mapping[str, Scalar] | None = None,
               extra: Mapping[str, str] | None = None) -> "DataItem":
        return cls(
            id=id,
            home_table=home_table,
            owner=owner,
            src=src,
            values=tuple(sorted((values or {}).items())),
            extra=tuple(sorted((extra or {}).items())),
        )

    def value(self, column: str) -> Scalar:
        return dict(self.values).get(column)

    def principal_in(self, dimension: str) -> str | None:
        return dict(self.extra).get(dimension)


@dataclass(frozen=True)
class Universe:
    dimensions: tuple[Dimension, ...]
    tables: frozenset[str]
    data: Mapping[str, frozenset[DataItem]]
    lt: Mapping[str, frozenset[str]]
    it: Mapping[tuple[str, str], frozenset[str]]
    wirings: frozenset[tuple[str, str]] = frozenset()
    # explicit sharing facts (from, to, item id) for dimensions beyond users/components
    grants: Mapping[str, frozenset[tuple[str, str, str]]] = field(default_factory=lambda: MappingProxyType({}))

    def dimension(self, name: str) -> Dimension:
        for dim in self.dimensions:
            if dim.name == name:
                return dim
        raise DimensionError(f"unknown dimension '{name}'")

    @property
    def users(self) -> frozenset[str]:
        return self.dimension(USERS).principals

    @property
    def components(self) -> frozenset[str]:
        return self.dimension(COMPONENTS).principals

    def items(self, table: str) -> frozenset[DataItem]:
        return self.data.get(table, frozenset())

    def all_items(self) -> frozenset[DataItem]:
        return frozenset(item for items in self.data.values() for item in items)

    def local_tables(self) -> frozenset[str]:
        return frozenset(t for tables in self.lt.values() for t in tables)

    def input_tables(self) -> frozenset[str]:
        return frozenset(t for tables in self.it.values() for t in tables)

    def local_owner(self, table: str) -> str | None:
        for component, tables in self.lt.items():
            if table in tables:
                return component
        return None

    def input_tables_of(self, component: str, user: str | None = None) -> frozenset[str]:
        return frozenset(
            t for (c, u), tables in self.it.items()
            if c == component and (user is None or u == user)
            for t in tables
        )

    def with_items(self, table: str, items: Iterable[DataItem]) -> "Universe":
        data = dict(self.data)
        data[table] = frozenset(data.get(table, frozenset())) | frozenset(items)
        return replace(self, data=MappingProxyType(data))

    def with_item_replaced(self, old: DataItem, new: DataItem) -> "Universe":
        data = {
            t: frozenset(new if item == old else item for item in items)
            for t, items in self.data.items()
        }
        return replace(self, data=MappingProxyType(data))

    def problems(self) -> list[str]:
        """Lists violations of the table-ownership partition and data completeness."""
        problems = []
        for table in sorted(self.tables):
            owners = [c for c, ts in self.lt.items() if table in ts]
            consumers = {c for (c, _), ts in self.it.items() if table in ts}
            if len(owners) + len(consumers) != 1:
                problems.append(f"table {table} is not owned by exactly one component")
        reachable = self.local_tables() | self.input_tables()
        for table, items in self.data.items():
            if items and table not in reachable:
                problems.append(f"items of table {table} are unreachable")
        return problems


class UniverseBuilder:
    """Mutable construction helper; `build()` freezes the result."""

    def __init__(self, extra_dimensions: Iterable[Dimension] = ()):
        self._users: set[str] = set()
        self._components: set[str] = set()
        self._extra = list(extra_dimensions)
        self._data: dict[str, set[DataItem]] = {}
        self._lt: dict[str, set[str]] = {}
        self._it: dict[tuple[str, str], set[str]] = {}
        self._wirings: set[tuple[str, str]] = set()
        self._grants: dict[str, set[tuple[str, str, str]]] = {}

    def user(self, *users: str) -> "UniverseBuilder":
        self._users.update(users)
        return self

    def component(self, *components: str) -> "UniverseBuilder":
        self._components.update(components)
        return self

    def local_table(self, component: str, table: str) -> "UniverseBuilder":
        self.component(component)
        self._lt.setdefault(component, set()).add(table)
        self._data.setdefault(table, set())
        return self

    def input_table(self, component: str, user: str, table: str) -> "UniverseBuilder":
        self.component(component)
        self.user(user)
        self._it.setdefault((component, user), set()).add(table)
        self._data.setdefault(table, set())
        return self

    def wiring(self, provider: str, consumer: str) -> "UniverseBuilder":
        self._wirings.add((provider, consumer))
        return self

    def grant(self, dimension: str, from_: str, to: str, item_id: str) -> "UniverseBuilder":
        self._grants.setdefault(dimension, set()).add((from_, to, item_id))
        return self

    def item(self, table: str, item: DataItem) -> "UniverseBuilder":
        self.user(item.owner)
        self.component(item.src)
        self._data.setdefault(table, set()).add(item)
        return self

    def build(self) -> Universe:
        dimensions = (
            Dimension(USERS, frozenset(self._users)),
            Dimension(COMPONENTS, frozenset(self._components)),
            *self._extra,
        )
        return Universe(
            dimensions=dimensions,
            tables=frozenset(self._data),
            data=MappingProxyType({t: frozenset(items) for t, items in self._data.items()}),
            lt=MappingProxyType({c: frozenset(ts) for c, ts in self._lt.items()}),
            it=MappingProxyType({k: frozenset(ts) for k, ts in self._it.items()}),
            wirings=frozenset(self._wirings),
            grants=MappingProxyType({d: frozenset(g) for d, g in self._grants.items()}),
        )


@dataclass(frozen=True)
class Request:
    """A single-operation request with its table scope and issuers.

    `row_filter` narrows the scope to the rows a statement matches; when it
    is absent every item of every scope table is in scope. `pending` holds
    the new rows of an INS request.
    """

    op: Op
    scope_tables: frozenset[str]
    issuers: tuple[tuple[str, str], ...]
    row_filter: Callable[[DataItem], bool] | None = field(default=None, compare=False)
    pending: tuple[DataItem, ...] = ()
    label: str = ""

    @classmethod
    def of(cls, op: Op | str, tables: Iterable[str], user: str, component: str,
           row_filter: Callable[[DataItem], bool] | None = None,
           pending: Iterable[DataItem] = (), label: str = "",
           **extra_issuers: str) -> "Request":
        issuers = ((USERS, user), (COMPONENTS, component), *sorted(extra_issuers.items()))
        return cls(
            op=Op(op),
            scope_tables=frozenset(tables),
            issuers=issuers,
            row_filter=row_filter,
            pending=tuple(pending),
            label=label,
        )

    def issuer(self, dimension: str) -> str:
        for name, principal in self.issuers:
            if name == dimension:
                return principal
        raise DimensionError(f"request has no issuer in dimension '{dimension}'")

    @property
    def issuer_user(self) -> str:
        return self.issuer(USERS)

    @property
    def issuer_component(self) -> str:
        return self.issuer(COMPONENTS)

    def describe(self) -> str:
        tables = ",".join(sorted(self.scope_tables)) or "-"
        return self.label or f"{self.op.value}[{tables}] as ({self.issuer_component},{self.issuer_user})"

"""Executable formal model: affected principals, sharing, req_valid and sb.

Every function here is pure over an immutable `Universe`.
"""
from __future__ import annotations

from src.errors import DimensionError, ScopeError
from src.model.universe import COMPONENTS, USERS, DataItem, Dimension, Op, Principal, Request, Universe


def affected_principal(item: DataItem, dim: Dimension | str) -> Principal:
    """
    Returns the principal affected by an access to `item` in dimension `dim`.

    Users are affected through the owner column, components through the
    item's source. Further dimensions read the item's extra provenance.
    """
    name = dim.name if isinstance(dim, Dimension) else dim
    if name == USERS:
        return Principal(USERS, item.owner)
    if name == COMPONENTS:
        return Principal(COMPONENTS, item.src)
    principal = item.principal_in(name)
    if principal is None:
        raise DimensionError(f"item {item.id} has no principal in dimension '{name}'")
    return Principal(name, principal)


def scope_data(u: Universe, r: Request) -> frozenset[DataItem]:
    """
    Lifts the table scope of `r` to data items.

    INS requests are scoped to their pending rows; all other requests to
    the stored rows of the scope tables that pass the request's row filter.
    """
    unknown = r.scope_tables - u.tables
    if unknown:
        raise ScopeError(f"request references unknown tables: {', '.join(sorted(unknown))}")

    if r.op is Op.INS:
        stray = [item.id for item in r.pending if item.home_table not in r.scope_tables]
        if stray:
            raise ScopeError(f"pending rows outside the request scope: {', '.join(stray)}")
        return frozenset(r.pending)

    items = (item for table in r.scope_tables for item in u.items(table))
    if r.row_filter is None:
        return frozenset(items)
    return frozenset(item for item in items if r.row_filter(item))


def shares_user(u: Universe, from_: str, to: str, d: DataItem) -> bool:
    """User-dimension sharing: every item held by a local or input table is public to all users."""
    if from_ != d.owner:
        raise ValueError(f"sharing in the user dimension starts at the owner of {d.id}")
    reachable = u.local_tables() | u.input_tables()
    return any(d in u.items(table) for table in reachable)


def shares_component(u: Universe, from_: str, to: str, d: DataItem, user: str | None = None) -> bool:
    """
    Component-dimension sharing: `from_` shares `d` with `to` iff `d` is part
    of an input table of `to`.

    With `user` given only the input-table instances of that user count,
    i.e. the row must pass the providing output table's invariant for the
    session user. Sharing is one wiring hop; it is not transitive.
    """
    if from_ != d.src:
        return False
    return any(d in u.items(table) for table in u.input_tables_of(to, user))


def shares(u: Universe, dim: Dimension, from_: str, to: str, d: DataItem, r: Request) -> bool:
    if dim.name == USERS:
        return shares_user(u, from_, to, d)
    if dim.name == COMPONENTS:
        return shares_component(u, from_, to, d, user=r.issuer_user)
    return (from_, to, d.id) in u.grants.get(dim.name, frozenset())


def item_valid(u: Universe, r: Request, d: DataItem) -> bool:
    for dim in u.dimensions:
        affected = affected_principal(d, dim).id
        issuer = r.issuer(dim.name)
        if affected != issuer and not shares(u, dim, affected, issuer, d, r):
            return False
    return True


def req_valid(u: Universe, r: Request) -> bool:
    """A request is valid iff, per dimension, each affected principal is the issuer or shared with it."""
    return all(item_valid(u, r, d) for d in scope_data(u, r))


def sb(u: Universe, r: Request) -> bool:
    """The sandbox decision for the two-dimensional instantiation.

    Modifications must stay within the issuer's local tables and touch only
    rows owned by the issuing user; reads may also cover the issuer's input
    tables for the issuing user.
    """
    user, component = r.issuer_user, r.issuer_component
    local = u.lt.get(component, frozenset())

    if r.op.modifying:
        if not r.scope_tables <= local:
            return False
        return all(d.owner == user for d in scope_data(u, r))

    readable = local | u.it.get((component, user), frozenset())
    return r.scope_tables <= readable

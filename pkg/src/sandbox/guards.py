"""Owner invariant, checked per row before the row is written.

    INS: NEW.owner <=> @uid
    UPD: NEW.owner <=> OLD.owner AND NEW.owner <=> @uid
    DEL: OLD.owner <=> @uid
"""
from __future__ import annotations

from typing import Any, Mapping

from src.errors import IdentityViolation, OwnerViolation
from src.model.universe import Op
from src.sandbox.session import IdentityBinder, Session
from src.schema.declarations import LocalTableDecl


def null_safe_equal(a: Any, b: Any) -> bool:
    """SQL `<=>`: NULL equals NULL, NULL never equals a value."""
    if a is None or b is None:
        return a is None and b is None
    return str(a) == str(b)


def guard_owner(binder: IdentityBinder, session: Session, op: Op, table: LocalTableDecl,
                old_row: Mapping[str, Any] | None, new_row: Mapping[str, Any] | None) -> None:
    """
    Raises:
        IdentityViolation: if the session digest does not verify for its f-unit.
        OwnerViolation: if the row breaks the owner invariant.
    """
    if not binder.verify(session, session.funit):
        raise IdentityViolation(f"identity digest of {session!r} does not verify")
    owner = table.owner_column
    uid = session.uid

    if op is Op.INS:
        if not null_safe_equal(new_row.get(owner), uid):
            raise OwnerViolation(f"inserted row of {table.name} must be owned by {uid}", table.name, dict(new_row))
    elif op is Op.UPD:
        if not null_safe_equal(new_row.get(owner), old_row.get(owner)):
            raise OwnerViolation(f"owner of a {table.name} row must not change", table.name, dict(old_row))
        if not null_safe_equal(new_row.get(owner), uid):
            raise OwnerViolation(f"{uid} may not update a {table.name} row owned by {old_row.get(owner)}",
                                 table.name, dict(old_row))
    elif op is Op.DEL:
        if not null_safe_equal(old_row.get(owner), uid):
            raise OwnerViolation(f"{uid} may not delete a {table.name} row owned by {old_row.get(owner)}",
                                 table.name, dict(old_row))

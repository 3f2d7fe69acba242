"""Exception hierarchy of the reference monitor.

Enforcement errors carry a stable ``code`` (reported to clients) and the
exit status the CLI maps them to.
"""
from __future__ import annotations

from typing import Any, Iterable


class MonitorError(Exception):
    code = "E_MONITOR"
    exit_code = 1

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        return self.message


# Enforcement errors (stable codes)

class QuerySyntaxError(MonitorError):
    code = "E_SYNTAX"
    exit_code = 2


class UnsupportedConstructError(MonitorError):
    code = "E_UNSUPPORTED"
    exit_code = 2


class UnknownTableError(MonitorError):
    code = "E_UNKNOWN_TABLE"
    exit_code = 3

    def __init__(self, table: str, funit: str):
        super().__init__(f"unknown table '{table}' for f-unit '{funit}'")
        self.table = table
        self.funit = funit


class OwnerViolation(MonitorError):
    code = "E_OWNER"
    exit_code = 4

    def __init__(self, message: str, table: str = "", row: dict[str, Any] | None = None):
        super().__init__(message)
        self.table = table
        self.row = row or {}


class IdentityViolation(MonitorError):
    code = "E_IDENTITY"
    exit_code = 5


class PermissionDenied(MonitorError):
    code = "E_PERMISSION"
    exit_code = 6


class ConstraintViolation(MonitorError):
    code = "E_CONSTRAINT"
    exit_code = 7


ENFORCEMENT_ERRORS = (
    QuerySyntaxError,
    UnsupportedConstructError,
    UnknownTableError,
    OwnerViolation,
    IdentityViolation,
    PermissionDenied,
    ConstraintViolation,
)


# Schema, wiring and integration errors

class SchemaSyntaxError(MonitorError):
    code = "E_SCHEMA"

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(message)
        self.line = line
        self.column = column

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


class InvariantSyntaxError(SchemaSyntaxError):
    code = "E_INVARIANT"


class SignatureError(MonitorError):
    code = "E_SIGNATURE"


class DiagnosticError(MonitorError):
    """An error that wraps a list of validator diagnostics."""

    def __init__(self, message: str, diagnostics: Iterable[Any] = ()):
        self.diagnostics = list(diagnostics)
        self.headline = message
        details = "; ".join(str(d) for d in self.diagnostics)
        super().__init__(f"{message}: {details}" if details else message)


class WiringError(DiagnosticError):
    code = "E_WIRING"


class IntegrationError(DiagnosticError):
    code = "E_INTEGRATION"


class GraphCycleError(MonitorError):
    code = "E_CYCLE"


class UnknownComponentError(MonitorError):
    code = "E_UNKNOWN_COMPONENT"


class ForeignKeyCycleError(MonitorError):
    code = "E_FK_CYCLE"


# Oracle errors

class ScopeError(MonitorError):
    code = "E_SCOPE"


class DimensionError(MonitorError):
    code = "E_DIMENSION"


class BudgetExceeded(MonitorError):
    code = "E_BUDGET"

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class ProtocolError(MonitorError):
    code = "E_PROTOCOL"

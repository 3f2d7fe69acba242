"""The reference monitor: sessions, statement execution and ecosystem state.

Every statement goes through the same pipeline: parse, split into
sub-requests, prefix table names for the session's f-unit, guard each
modified row, then run against the store as one atomic unit. Integration,
wiring and activation changes go through `unit()`, which rolls back the
store and the in-memory state together.
"""
from __future__ import annotations

import logging
import sqlite3
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

from sqlglot import exp

from src.errors import (
    ConstraintViolation,
    IdentityViolation,
    IntegrationError,
    MonitorError,
    PermissionDenied,
    QuerySyntaxError,
    UnknownComponentError,
    WiringError,
)
from src.graph.ecosystem_graph import EcosystemGraph, sharing_edges
from src.model.universe import DataItem, Op, Request, Universe, UniverseBuilder
from src.sandbox.guards import guard_owner
from src.sandbox.prefixing import physical_name, prefix_tables
from src.sandbox.query import QueryAst, parse_query
from src.sandbox.session import IdentityBinder, Session
from src.sandbox.store import Store, quote, render
from src.schema.catalog import Catalog
from src.schema.declarations import LocalTableDecl, SchemaDecl
from src.schema.parser import parse_db_file
from src.schema.validator import Signature, output_signature, table_signature, validate_schema
from src.wiring.checker import check_wiring
from src.wiring.foreign_keys import DeletedRow, ForeignKeyEnforcer, declare_foreign_keys
from src.wiring.restriction import UID_PARAMETER
from src.wiring.spec import WiringSpec, parse_wirings
from src.wiring.views import ViewCompiler

logger = logging.getLogger(__name__)


def local_home(component: str, table: str) -> str:
    """Universe table name of a local table."""
    return f"{component}.{table}"


def input_instance(component: str, table: str, user: str) -> str:
    """Universe table name of the per-user instance of an input table."""
    return f"{component}.{table}@{user}"


@dataclass(frozen=True)
class SubRequest:
    """One operation a statement was split into, with the rows it touched."""

    op: Op
    component: str
    tables: tuple[str, ...]
    keys: tuple[str, ...] = ()
    pending: tuple[dict, ...] = ()

    def __str__(self) -> str:
        detail = f" keys={','.join(self.keys)}" if self.keys else ""
        return f"{self.op.value}[{','.join(self.tables)}]{detail}"


@dataclass
class ExecutionResult:
    op: Op
    columns: list[str] = field(default_factory=list)
    rows: list[tuple] = field(default_factory=list)
    rowcount: int = 0
    sub_requests: list[SubRequest] = field(default_factory=list)
    rebuild_order: list[str] = field(default_factory=list)
    cascaded: list[DeletedRow] = field(default_factory=list)


class ReferenceMonitor:
    def __init__(self, store: Store):
        self.store = store
        self.catalog = Catalog()
        self.graph = EcosystemGraph()
        self.wirings: list[WiringSpec] = []
        self._binder = IdentityBinder(store.secret_key)
        self._load()

    @classmethod
    def open(cls, path: str | Path = ":memory:", secret_key: str | None = None) -> "ReferenceMonitor":
        return cls(Store(path, secret_key=secret_key))

    def close(self) -> None:
        self.store.close()

    def _load(self) -> None:
        for funit, source in self.store.load_funits():
            self.catalog.add(parse_db_file(source, funit))
            self.graph.add_node(funit)
        nodes, activations = self.store.load_graph()
        self.graph.nodes.update(nodes)
        self.graph.act_edges.update(activations)
        for source in self.store.load_wirings():
            self.wirings.extend(parse_wirings(source))
        self.graph.sh_edges.update(sharing_edges(self.wirings))
        if self.catalog:
            logger.debug(f"Loaded {len(self.catalog)} f-units and {len(self.wirings)} wirings from {self.store.path}")

    def _save(self) -> None:
        self.store.save_wirings([w.to_text() for w in self.wirings])
        self.store.save_graph(self.graph.nodes, self.graph.act_edges)

    @contextmanager
    def unit(self) -> Iterator[None]:
        """All-or-nothing scope for state changes; nests into an enclosing unit."""
        with self.store.transaction():
            saved = (self.catalog.copy(), self.graph.copy(), list(self.wirings))
            try:
                yield
                self._save()
            except BaseException:
                self.catalog, self.graph, self.wirings = saved
                raise

    def views(self, restricted: bool = True) -> ViewCompiler:
        return ViewCompiler(self.catalog, self.wirings, restricted=restricted)

    def foreign_keys(self) -> ForeignKeyEnforcer:
        return ForeignKeyEnforcer(self.store, self.catalog, self.views(restricted=False))

    def _schema(self, funit: str) -> SchemaDecl:
        schema = self.catalog.get(funit)
        if schema is None:
            raise UnknownComponentError(f"f-unit '{funit}' is not integrated")
        return schema

    # Integration

    def integrate(self, decl: SchemaDecl, source: str, force: bool = False) -> None:
        """
        Integrates one f-unit: validates its declaration, creates its local
        tables and registers it as a graph node.

        Args:
            decl: the parsed `.db` file.
            source: the `.db` text, persisted so the store can be reopened.
            force: replace an f-unit that is already integrated. Its data
                and the wirings that touch it are dropped.

        Raises:
            IntegrationError: with the validator diagnostics.
        """
        with self.unit():
            existing = self.catalog.get(decl.funit)
            if existing is not None and not force:
                raise IntegrationError(f"f-unit '{decl.funit}' is already integrated (use --force to replace it)")
            if existing is not None:
                self._drop(existing)
            diagnostics = validate_schema(decl, self.catalog)
            if diagnostics:
                raise IntegrationError(f"cannot integrate '{decl.funit}'", diagnostics)
            declare_foreign_keys(decl)
            for table in decl.locals:
                physical = physical_name(decl.funit, table.name)
                if self.store.table_exists(physical):
                    raise IntegrationError(f"storage name '{physical}' is already taken")
                self.store.create_table(physical, table)
            self.catalog.add(decl)
            self.graph.add_node(decl.funit)
            self.store.save_funit(decl.funit, source)
            if existing is not None:
                self.foreign_keys().sweep()
        logger.info(
            f"Integrated {decl.funit}: {len(decl.locals)} local, {len(decl.inputs)} input, {len(decl.outputs)} output tables"
        )

    def _drop(self, decl: SchemaDecl) -> None:
        touching = [w for w in self.wirings if decl.funit in (w.source_component, w.target_component)]
        for spec in touching:
            logger.warning(f"Dropping wiring {spec.name}")
        self.wirings = [w for w in self.wirings if w not in touching]
        self.graph.sh_edges = sharing_edges(self.wirings)
        for table in decl.locals:
            self.store.drop_table(physical_name(decl.funit, table.name))
        self.catalog.remove(decl.funit)
        self.store.delete_funit(decl.funit)

    def remove(self, funit: str) -> None:
        with self.unit():
            self._drop(self._schema(funit))
            activations = {e for e in self.graph.act_edges if funit in e}
            self.graph.remove_node(funit)
            self.foreign_keys().sweep()
        logger.info(f"Removed {funit} and {len(activations)} activations")

    def add_node(self, name: str) -> None:
        """Registers a component without tables, e.g. a presentation-only f-unit."""
        with self.unit():
            self.graph.add_node(name)

    def add_activation(self, parent: str, child: str) -> None:
        with self.unit():
            self.graph.add_activation(parent, child)

    def add_wiring(self, spec: WiringSpec, path: str = "") -> None:
        """
        Raises:
            WiringError: with the diagnostics of `check_wiring`.
        """
        with self.unit():
            diagnostics = check_wiring(spec, self.catalog, self.graph, path)
            if diagnostics:
                raise WiringError(f"cannot apply wiring {spec.name}", diagnostics)
            self.wirings.append(spec)
            self.graph.add_sharing(spec.source_component, spec.target_component)
            target = self.catalog.get(spec.target_component)
            self.views().compile_input_view(target.funit, target.input(spec.target_table))
        logger.info(f"Applied wiring {spec.name}")

    def signatures(self) -> dict[str, dict[str, Signature]]:
        """Input and output table signatures per f-unit, as shown to the integrator."""
        result = {}
        for schema in self.catalog:
            tables = {f"INPUT {t.name}": table_signature(t) for t in schema.inputs}
            for output in schema.outputs:
                tables[f"OUTPUT {output.name}"] = output_signature(output, self.catalog, schema.funit)
            result[schema.funit] = tables
        return result

    # Sessions

    def open_session(self, funit: str, uid: str) -> Session:
        if not uid:
            raise IdentityViolation("a session needs a non-empty uid")
        if funit not in self.catalog:
            raise IdentityViolation(f"f-unit '{funit}' is not integrated")
        session = self._binder.bind(funit, uid)
        logger.info(f"Opened session for {uid} in {funit}")
        return session

    def verify_uid(self, session: Session, claimed_funit: str) -> bool:
        return self._binder.verify(session, claimed_funit)

    # Execution

    def execute(self, session: Session, text: str) -> ExecutionResult:
        """
        Runs one statement under `session`.

        Statements, reads included, run one at a time on the store's single
        connection, so a SELECT never sees another session's open transaction.

        Returns:
            ExecutionResult: rows for SELECT, a row count otherwise, plus the
                sub-requests the statement was split into and, for accepted
                modifications, the rebuild order.

        Raises:
            MonitorError: any enforcement error; the store is left unchanged.
        """
        try:
            with self.store.lock:
                return self._execute(session, text)
        except MonitorError as e:
            logger.warning(f"Rejected statement of {session.uid} in {session.funit} ({e.code}): {e}")
            raise

    def _run(self, sql: str, params: dict | tuple = ()) -> sqlite3.Cursor:
        try:
            return self.store.execute(sql, params)
        except sqlite3.IntegrityError as e:
            raise ConstraintViolation(str(e)) from None
        except sqlite3.Error as e:
            raise QuerySyntaxError(str(e)) from None

    def _execute(self, session: Session, text: str) -> ExecutionResult:
        if not self.verify_uid(session, session.funit):
            raise IdentityViolation(f"identity digest of {session!r} does not verify")
        schema = self.catalog.get(session.funit)
        if schema is None:
            raise IdentityViolation(f"f-unit '{session.funit}' is not integrated")
        ast = parse_query(text)
        prefixed = prefix_tables(schema, ast, self.views())
        params = {UID_PARAMETER: session.uid}

        if ast.op is Op.SEL:
            cursor = self._run(render(prefixed.tree), params)
            columns = [d[0] for d in cursor.description or ()]
            rows = cursor.fetchall()
            return ExecutionResult(
                Op.SEL, columns, rows, len(rows), [SubRequest(Op.SEL, schema.funit, ast.tables)]
            )

        table = schema.local(ast.target)
        with self.store.transaction():
            if ast.op is Op.INS:
                result = self._insert(session, table, prefixed, params)
            elif ast.op is Op.UPD:
                result = self._update(session, table, prefixed, params)
            else:
                result = self._delete(session, table, prefixed, params)
            result.cascaded += self.foreign_keys().sweep()

        if ast.sub_selects:
            result.sub_requests.append(SubRequest(Op.SEL, schema.funit, ast.sub_select_tables()))
        if result.rowcount or result.cascaded:
            result.rebuild_order = self.graph.rebuild_order(self.graph.stale_closure(schema.funit))
            logger.info(
                f"{ast.op.value} on {schema.funit}.{table.name} by {session.uid}: {result.rowcount} rows, "
                f"rebuild {', '.join(result.rebuild_order)}"
            )
        return result

    def _column(self, table: LocalTableDecl, name: str) -> str:
        column = table.column(name)
        if column is None:
            raise QuerySyntaxError(f"unknown column '{name}' in table {table.name}")
        return column.name

    def _matching_rows(self, target: exp.Table, table: LocalTableDecl, where: exp.Expression | None,
                       extra: list[exp.Expression], params: dict) -> list[tuple[int, dict, list]]:
        alias = exp.to_identifier(target.alias, quoted=True)
        select = exp.select(
            exp.Column(this=exp.to_identifier("rowid"), table=alias.copy()),
            *[exp.Column(this=exp.to_identifier(c.name, quoted=True), table=alias.copy()) for c in table.columns],
            *[exp.alias_(e.copy(), f"new_{i}", quoted=True) for i, e in enumerate(extra)],
        ).from_(target.copy())
        if where is not None:
            select = select.where(where.copy())
        matched = []
        width = len(table.columns)
        for row in self._run(render(select), params).fetchall():
            old = dict(zip((c.name for c in table.columns), row[1:1 + width]))
            matched.append((row[0], old, list(row[1 + width:])))
        return matched

    def _insert(self, session: Session, table: LocalTableDecl, ast: QueryAst, params: dict) -> ExecutionResult:
        physical = physical_name(session.funit, table.name)
        columns = [self._column(table, name) for name in ast.insert_columns()]
        if len({c.lower() for c in columns}) != len(columns):
            raise QuerySyntaxError(f"a column of {table.name} is listed twice")
        enforcer = self.foreign_keys()
        keys, pending = [], []
        for values in ast.insert_rows():
            select = exp.select(*[exp.alias_(v.copy(), f"v{i}", quoted=True) for i, v in enumerate(values)])
            evaluated = self._run(render(select), params).fetchone()
            row: dict[str, Any] = {c.name: None for c in table.columns}
            row.update(zip(columns, evaluated))
            if row[table.key_column] is None:
                row[table.key_column] = self.store.next_key(physical, table.key_column)
            row[table.key_column] = str(row[table.key_column])
            guard_owner(self._binder, session, Op.INS, table, None, row)
            enforcer.check_references(session.funit, table, [row])
            names = ", ".join(quote(name) for name in row)
            marks = ", ".join("?" for _ in row)
            self._run(f"INSERT INTO {quote(physical)} ({names}) VALUES ({marks})", tuple(row.values()))
            keys.append(row[table.key_column])
            pending.append(row)
        request = SubRequest(Op.INS, session.funit, (table.name,), tuple(keys), tuple(pending))
        return ExecutionResult(Op.INS, rowcount=len(keys), sub_requests=[request])

    def _update(self, session: Session, table: LocalTableDecl, ast: QueryAst, params: dict) -> ExecutionResult:
        physical = physical_name(session.funit, table.name)
        assignments = [(self._column(table, name), value) for name, value in ast.assignments()]
        for name, _ in assignments:
            if name == table.key_column:
                raise PermissionDenied(f"the KEY column {table.name}.{name} is immutable")
        enforcer = self.foreign_keys()
        matched = self._matching_rows(ast.tree.this, table, ast.where, [v for _, v in assignments], params)
        keys = []
        for rowid, old, values in matched:
            new = dict(old)
            new.update(zip((name for name, _ in assignments), values))
            guard_owner(self._binder, session, Op.UPD, table, old, new)
            enforcer.check_references(session.funit, table, [new])
            setters = ", ".join(f"{quote(name)} = ?" for name, _ in assignments)
            self._run(f"UPDATE {quote(physical)} SET {setters} WHERE rowid = ?",
                      (*(new[name] for name, _ in assignments), rowid))
            keys.append(str(old[table.key_column]))
        request = SubRequest(Op.UPD, session.funit, (table.name,), tuple(keys))
        return ExecutionResult(Op.UPD, rowcount=len(keys), sub_requests=[request])

    def _delete(self, session: Session, table: LocalTableDecl, ast: QueryAst, params: dict) -> ExecutionResult:
        physical = physical_name(session.funit, table.name)
        matched = self._matching_rows(ast.tree.this, table, ast.where, [], params)
        for _, old, _ in matched:
            guard_owner(self._binder, session, Op.DEL, table, old, None)
        keys = [str(old[table.key_column]) for _, old, _ in matched]
        for rowid, _, _ in matched:
            self._run(f"DELETE FROM {quote(physical)} WHERE rowid = ?", (rowid,))
        cascaded = self.foreign_keys().cascade_on_delete(session.funit, table.name, keys)
        request = SubRequest(Op.DEL, session.funit, (table.name,), tuple(keys))
        return ExecutionResult(Op.DEL, rowcount=len(keys), sub_requests=[request], cascaded=cascaded)

    # Reads for the host and the oracle

    def local_rows(self, funit: str, table: str) -> tuple[list[str], list[tuple]]:
        decl = self._schema(funit).local(table)
        if decl is None:
            raise UnknownComponentError(f"{funit} has no local table '{table}'")
        return self.store.query(f"SELECT * FROM {quote(physical_name(funit, decl.name))} ORDER BY rowid")

    def input_rows(self, funit: str, table: str, uid: str, restricted: bool = True) -> tuple[list[str], list[tuple]]:
        """Rows of an input table as seen by `uid`; with `restricted=False` the unrestricted union."""
        decl = self._schema(funit).input(table)
        if decl is None:
            raise UnknownComponentError(f"{funit} has no input table '{table}'")
        view = self.views(restricted).input_view(funit, decl)
        return self.store.query(render(view), {UID_PARAMETER: uid})

    def output_rows(self, funit: str, output: str, uid: str, restricted: bool = True) -> tuple[list[str], list[tuple]]:
        decl = self._schema(funit).output(output)
        if decl is None:
            raise UnknownComponentError(f"{funit} has no output table '{output}'")
        view = self.views(restricted).restricted_view(funit, decl)
        return self.store.query(render(view), {UID_PARAMETER: uid})

    def users(self) -> set[str]:
        """Every owner value found in a local table."""
        users = set()
        for schema in self.catalog:
            for table in schema.locals:
                columns, rows = self.local_rows(schema.funit, table.name)
                position = [c.lower() for c in columns].index(table.owner_column.lower())
                users.update(str(row[position]) for row in rows if row[position] is not None)
        return users

    def snapshot_universe(self, users: Iterable[str] = ()) -> Universe:
        """
        Exports the current state as a model universe.

        Local rows become items of `Comp.table` with `src = Comp`; every
        input table gets one instance per user holding that user's
        restricted view, with `src` set to the providing component. Rows
        without an owner are not representable and are skipped.
        """
        with self.store.lock:
            users = sorted(set(users) | self.users())
            builder = UniverseBuilder().user(*users).component(*self.graph.nodes)
            for schema in self.catalog:
                for table in schema.locals:
                    home = local_home(schema.funit, table.name)
                    builder.local_table(schema.funit, home)
                    columns, rows = self.local_rows(schema.funit, table.name)
                    for values in (dict(zip(columns, row)) for row in rows):
                        item = self._item(home, values, table.key_column, table.owner_column, schema.funit)
                        if item is not None:
                            builder.item(home, item)
                for table in schema.inputs:
                    for user in users:
                        instance = input_instance(schema.funit, table.name, user)
                        builder.input_table(schema.funit, user, instance)
                        columns, rows = self.input_rows(schema.funit, table.name, user)
                        for values in (dict(zip(columns, row)) for row in rows):
                            item = self._item(instance, values, table.key_column, table.owner_column, values.get("src"))
                            if item is not None:
                                builder.item(instance, item)
            for spec in self.wirings:
                builder.wiring(spec.source_component, spec.target_component)
            return builder.build()

    @staticmethod
    def _item(home: str, values: dict, key_column: str, owner_column: str, src: str | None) -> DataItem | None:
        owner = values.get(owner_column)
        if owner is None or not src:
            return None
        data = {k: v for k, v in values.items() if k != "src"}
        return DataItem.create(f"{home}/{values[key_column]}", home, str(owner), src, data)

    def to_requests(self, session: Session, result: ExecutionResult) -> list[Request]:
        """Maps the sub-requests of an executed statement onto model requests."""
        schema = self._schema(session.funit)
        requests = []
        for sub in result.sub_requests:
            if sub.op is Op.SEL:
                tables = []
                for name in sub.tables:
                    if schema.local(name) is not None:
                        tables.append(local_home(sub.component, schema.local(name).name))
                    elif schema.input(name) is not None:
                        tables.append(input_instance(sub.component, schema.input(name).name, session.uid))
                requests.append(Request.of(Op.SEL, tables, session.uid, sub.component, label=str(sub)))
                continue
            table = schema.local(sub.tables[0])
            home = local_home(sub.component, table.name)
            if sub.op is Op.INS:
                pending = [
                    DataItem.create(f"{home}/{row[table.key_column]}", home, str(row[table.owner_column]),
                                    sub.component, row)
                    for row in sub.pending
                ]
                requests.append(Request.of(Op.INS, [home], session.uid, sub.component, pending=pending, label=str(sub)))
            else:
                matched = frozenset(f"{home}/{key}" for key in sub.keys)
                requests.append(Request.of(sub.op, [home], session.uid, sub.component,
                                           row_filter=lambda d, ids=matched: d.id in ids, label=str(sub)))
        return requests

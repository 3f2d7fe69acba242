"""Bundle integration: schemas, activations, wirings and seed data in one unit."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from src.errors import IntegrationError
from src.host.bundle import AppBundle, FUnitDir
from src.sandbox.monitor import ReferenceMonitor
from src.schema.parser import load_db_file
from src.schema.validator import Signature
from src.wiring.spec import WiringSpec, parse_activations, parse_wirings

logger = logging.getLogger(__name__)

SEED_USER = re.compile(r"^--\s*as\s+(?P<uid>\S+)\s*$", re.IGNORECASE)


@dataclass
class IntegrationReport:
    funits: list[str] = field(default_factory=list)
    activations: list[tuple[str, str]] = field(default_factory=list)
    wirings: list[str] = field(default_factory=list)
    skipped_wirings: list[str] = field(default_factory=list)
    seeded: int = 0
    signatures: dict[str, dict[str, Signature]] = field(default_factory=dict)


def seed_statements(text: str) -> list[tuple[str, str]]:
    """
    Splits a `seed.sql` file into (uid, statement) pairs.

    A `-- as <uid>` line sets the user for the statements that follow;
    other `--` lines are comments. Statements end with `;` at the end of a
    line.
    """
    statements, user, buffer = [], None, []
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        match = SEED_USER.match(stripped)
        if match:
            user = match["uid"]
            continue
        if not stripped or stripped.startswith("--"):
            continue
        buffer.append(stripped)
        if stripped.endswith(";"):
            if user is None:
                raise IntegrationError(f"seed statement ending on line {number} has no '-- as <uid>' line before it")
            statements.append((user, " ".join(buffer).rstrip(";").strip()))
            buffer = []
    if buffer:
        raise IntegrationError("seed file ends inside a statement")
    return statements


def _apply_activations(monitor: ReferenceMonitor, path: Path, report: IntegrationReport) -> None:
    for parent, child in parse_activations(path.read_text(encoding="utf-8")):
        for name in (parent, child):
            if name not in monitor.graph.nodes:
                monitor.add_node(name)
        if (parent, child) not in monitor.graph.act_edges:
            monitor.add_activation(parent, child)
            report.activations.append((parent, child))


def apply_wirings(monitor: ReferenceMonitor, specs: list[WiringSpec], path: str = "",
                  report: IntegrationReport | None = None) -> IntegrationReport:
    """Applies wirings whose endpoints are both integrated; others are skipped."""
    report = report or IntegrationReport()
    for spec in specs:
        if spec in monitor.wirings:
            continue
        missing = [c for c in (spec.source_component, spec.target_component) if c not in monitor.catalog]
        if missing:
            logger.warning(f"Skipping wiring {spec.name}: {', '.join(missing)} not integrated")
            report.skipped_wirings.append(spec.name)
            continue
        monitor.add_wiring(spec, path)
        report.wirings.append(spec.name)
    return report


def apply_wiring_file(monitor: ReferenceMonitor, path: str | Path) -> IntegrationReport:
    path = Path(path)
    specs = parse_wirings(path.read_text(encoding="utf-8"))
    with monitor.unit():
        report = apply_wirings(monitor, specs, str(path))
        if report.skipped_wirings:
            raise IntegrationError(f"wirings reference f-units that are not integrated: {', '.join(report.skipped_wirings)}")
    return report


def _seed(monitor: ReferenceMonitor, funit: FUnitDir) -> int:
    rows = 0
    for uid, statement in seed_statements(funit.seed_file.read_text(encoding="utf-8")):
        session = monitor.open_session(funit.name, uid)
        rows += monitor.execute(session, statement).rowcount
    return rows


def integrate_bundle(monitor: ReferenceMonitor, bundle: AppBundle, only: str | None = None,
                     force: bool = False) -> IntegrationReport:
    """
    Integrates the f-units of `bundle` (or only `only`) as one unit: either
    every schema, activation, wiring and seed row is applied or nothing is.

    Raises:
        IntegrationError: with diagnostics; the store is unchanged.
    """
    selected = [bundle.funit(only)] if only else list(bundle.funits)
    report = IntegrationReport()
    with monitor.unit():
        for funit in selected:
            decl = load_db_file(funit.db_file, funit.name)
            monitor.integrate(decl, funit.db_file.read_text(encoding="utf-8"), force=force)
            report.funits.append(funit.name)
        activation_files = [bundle.activations_file] + [f.activations_file for f in selected]
        for path in filter(None, activation_files):
            _apply_activations(monitor, path, report)
        for funit in selected:
            if funit.wirings_file is not None:
                specs = parse_wirings(funit.wirings_file.read_text(encoding="utf-8"))
                apply_wirings(monitor, specs, str(funit.wirings_file), report)
        for funit in selected:
            if funit.seed_file is not None:
                report.seeded += _seed(monitor, funit)
    report.signatures = monitor.signatures()
    logger.info(
        f"Integrated bundle {bundle.root}: {len(report.funits)} f-units, {len(report.wirings)} wirings, "
        f"{report.seeded} seed rows"
    )
    return report

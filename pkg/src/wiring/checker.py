"""Static checks for wirings before they are applied."""
from __future__ import annotations

from src.errors import MonitorError
from src.graph.ecosystem_graph import EcosystemGraph
from src.schema.catalog import Catalog
from src.schema.invariant import KEY_COLUMN, OWNER_COLUMN
from src.schema.validator import Diagnostic, output_signature
from src.wiring.spec import ConstantValue, SourceColumn, WiringSpec

MARKER_SOURCES = {"KEY": KEY_COLUMN, "OWNER": OWNER_COLUMN}


def check_wiring(spec: WiringSpec, catalog: Catalog, graph: EcosystemGraph, path: str = "") -> list[Diagnostic]:
    """
    Returns the reasons `spec` cannot be applied; empty means ok.

    The column map must be total over the input table, marker columns must
    carry the source's key and owner, types must be compatible, and the
    resulting sharing edge must keep the combined graph acyclic.
    """
    diagnostics: list[Diagnostic] = []

    def report(message: str) -> None:
        diagnostics.append(Diagnostic(f"{spec.name}: {message}", spec.line, 1, path))

    source = catalog.get(spec.source_component)
    target = catalog.get(spec.target_component)
    if source is None:
        report(f"unknown source f-unit '{spec.source_component}'")
    if target is None:
        report(f"unknown target f-unit '{spec.target_component}'")
    if diagnostics:
        return diagnostics

    output = source.output(spec.source_table)
    input_table = target.input(spec.target_table)
    if output is None:
        report(f"{spec.source_component} has no output table '{spec.source_table}'")
    if input_table is None:
        report(f"{spec.target_component} has no input table '{spec.target_table}'")
    if diagnostics:
        return diagnostics

    try:
        signature = {name.lower(): sql_type for name, sql_type in output_signature(output, catalog, source.funit)}
    except MonitorError as e:
        report(f"cannot derive the signature of {output.name}: {e}")
        return diagnostics

    mapped = [column.lower() for column, _ in spec.column_map]
    for column in sorted({c for c in mapped if mapped.count(c) > 1}):
        report(f"column '{column}' is mapped more than once")
    for column, _ in spec.column_map:
        if input_table.column(column) is None:
            report(f"'{column}' is not a column of {input_table.name}")

    for column in input_table.columns:
        origin = spec.source_for(column.name)
        if origin is None:
            report(f"column '{column.name}' is not mapped")
            continue
        marker = MARKER_SOURCES.get(column.type.name)
        if marker is not None:
            if not isinstance(origin, SourceColumn) or origin.name.lower() != marker:
                report(f"{column.type.name} column '{column.name}' must map to the source column '{marker}'")
            if marker not in signature:
                report(f"{output.name} does not project '{marker}'")
            continue
        if isinstance(origin, ConstantValue):
            if column.type.is_numeric and not origin.value.lstrip("-").isdigit():
                report(f"constant {origin} is not a valid {column.type} for '{column.name}'")
            continue
        source_type = signature.get(origin.name.lower())
        if source_type is None:
            report(f"{output.name} has no column '{origin.name}'")
        elif column.type.is_numeric and not source_type.is_numeric:
            report(f"'{origin.name}' ({source_type}) is not compatible with '{column.name}' ({column.type})")

    problem = graph.can_share(spec.source_component, spec.target_component)
    if problem:
        report(problem)
    return diagnostics

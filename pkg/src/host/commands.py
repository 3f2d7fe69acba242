"""CLI subcommands. Each one takes the parsed arguments and an open monitor
and returns the process exit status; enforcement errors propagate to the
entry point, which maps them to exit codes."""
import argparse
import logging

import msg
from src.host.bundle import load_bundle
from src.host.integrator import apply_wiring_file, integrate_bundle
from src.host.service import serve as serve_forever
from src.host.soundness import run_soundness
from src.sandbox.monitor import ReferenceMonitor
from utils import console, plain_print, rich_print, signature_table, tsv

logger = logging.getLogger(__name__)


def print_signatures(monitor: ReferenceMonitor) -> None:
    for funit, tables in monitor.signatures().items():
        if tables:
            console.print(signature_table(funit, tables))


async def integrate(args: argparse.Namespace, monitor: ReferenceMonitor) -> int:
    bundle = load_bundle(args.bundle)
    with console.status(msg.STATUS):
        report = integrate_bundle(monitor, bundle, only=args.funit, force=args.force)
    console.print(f"{msg.OK}{len(report.funits)} f-units integrated: {', '.join(report.funits)}")
    console.print(f"{msg.OK}{len(report.wirings)} wirings applied")
    for name in report.skipped_wirings:
        console.print(f"{msg.WARNING}wiring {name} skipped: an endpoint is not integrated")
    if report.seeded:
        console.print(f"{msg.OK}{report.seeded} seed rows inserted")
    print_signatures(monitor)
    rich_print(f"{msg.DONE}{monitor.store.path}")
    return 0


async def query(args: argparse.Namespace, monitor: ReferenceMonitor) -> int:
    session = monitor.open_session(args.funit, args.user)
    result = monitor.execute(session, args.sql)
    if result.op.modifying:
        plain_print(str(result.rowcount))
        if result.rebuild_order:
            logger.debug(f"Rebuild order: {', '.join(result.rebuild_order)}")
    else:
        plain_print(tsv(result.columns, result.rows))
    return 0


async def graph(args: argparse.Namespace, monitor: ReferenceMonitor) -> int:
    plain_print(monitor.graph.export())
    return 0


async def simulate_change(args: argparse.Namespace, monitor: ReferenceMonitor) -> int:
    stale = monitor.graph.stale_closure(args.funit)
    plain_print(", ".join(monitor.graph.rebuild_order(stale)))
    return 0


async def serve(args: argparse.Namespace, monitor: ReferenceMonitor) -> int:
    console.print(f"{msg.OK}Serving on {args.socket}")
    await serve_forever(monitor, args.socket)
    return 0


async def soundness(args: argparse.Namespace, monitor: ReferenceMonitor) -> int:
    run = run_soundness(args.trials, args.seed, budget=args.budget, replay_every=args.replay_every,
                        inject_fault=args.inject_fault, progress=not args.no_progress)
    for violation in run.violations:
        plain_print(violation)
    for line in run.details():
        plain_print(line)
    plain_print(run.summary())
    return 1 if run.violations else 0


async def wire(args: argparse.Namespace, monitor: ReferenceMonitor) -> int:
    report = apply_wiring_file(monitor, args.file)
    console.print(f"{msg.OK}{len(report.wirings)} wirings applied")
    return 0


async def signatures(args: argparse.Namespace, monitor: ReferenceMonitor) -> int:
    print_signatures(monitor)
    return 0


COMMANDS = {
    "integrate": integrate,
    "query": query,
    "graph": graph,
    "simulate-change": simulate_change,
    "serve": serve,
    "soundness": soundness,
    "wire": wire,
    "signatures": signatures,
}

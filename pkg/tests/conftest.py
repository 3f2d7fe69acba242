"""Shared fixtures: an in-memory monitor and the integrated demo ecosystem."""
from pathlib import Path

import pytest

from src.host.bundle import load_bundle
from src.host.integrator import integrate_bundle
from src.sandbox.monitor import ReferenceMonitor
from src.schema.parser import parse_db_file
from src.wiring.spec import parse_wirings

BUNDLE = Path(__file__).resolve().parent.parent / "bundles" / "social_network"
SECRET_KEY = "0123456789abcdef" * 4


@pytest.fixture
def monitor():
    monitor = ReferenceMonitor.open(":memory:", secret_key=SECRET_KEY)
    yield monitor
    monitor.close()


@pytest.fixture
def demo(monitor):
    integrate_bundle(monitor, load_bundle(BUNDLE))
    return monitor


@pytest.fixture
def run():
    """`run(monitor, funit, uid, sql)` executes one statement in a fresh session."""

    def execute(monitor, funit, uid, sql):
        return monitor.execute(monitor.open_session(funit, uid), sql)

    return execute


@pytest.fixture
def integrate():
    """`integrate(monitor, funit, text)` integrates one `.db` text as one unit."""

    def apply(monitor, funit, text, wirings=""):
        with monitor.unit():
            monitor.integrate(parse_db_file(text, funit), text)
            for spec in parse_wirings(wirings):
                monitor.add_wiring(spec)

    return apply

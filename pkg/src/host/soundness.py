"""Soundness runs: pure-model trials plus replays of executed statements.

A model trial draws a random universe, samples requests from its full
enumeration and checks that `sb` never admits what `req_valid` forbids.
A replay trial integrates a small random ecosystem into an in-memory
monitor, executes random statements and checks every accepted statement,
mapped back to model requests, against a snapshot taken before it ran.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field

from tqdm import tqdm

from src.errors import MonitorError
from src.model.generator import corrupt_src, enumerate_requests, random_universe, requests_touching
from src.model.oracle import req_valid, sb
from src.model.soundness import DEFAULT_BUDGET, soundness_check
from src.model.universe import Universe
from src.sandbox.monitor import ReferenceMonitor
from src.schema.parser import parse_db_file
from src.wiring.spec import parse_wirings

logger = logging.getLogger(__name__)

REQUESTS_PER_TRIAL = 8
STATEMENTS_PER_REPLAY = 12

NOTES_DB = """
TABLE notes (
    id KEY,
    owner OWNER,
    peer VARCHAR(20),
    body TEXT
);

OUTPUT TABLE shared = SELECT id AS key, owner, peer, body FROM notes
    INVARIANT {invariant};
"""

BOARD_DB = """
INPUT TABLE feed (
    key KEY,
    owner OWNER,
    body TEXT
);

TABLE pins (
    id KEY,
    owner OWNER,
    note TEXT,
    FOREIGN KEY (note) REFERENCES feed(key)
);
"""

BOARD_WIRING = """
WIRE Notes.shared -> Board.feed
  key   <- key
  owner <- owner
  body  <- body
"""

REPLAY_INVARIANTS = ("ALL", "is(owner, @uid)", "is(owner, @uid) OR is(peer, @uid)")


@dataclass
class SoundnessRun:
    trials: int
    seed: int
    checked: int = 0
    evaluations: int = 0
    replays: int = 0
    statements: int = 0
    accepted: int = 0
    violations: list[str] = field(default_factory=list)

    def summary(self) -> str:
        return f"{len(self.violations)} violations / {self.trials} trials"

    def details(self) -> list[str]:
        return [
            f"seed {self.seed}",
            f"{self.checked} model requests, {self.evaluations} oracle evaluations",
            f"{self.replays} replays, {self.accepted}/{self.statements} statements accepted",
        ]


def model_trial(rng: random.Random, budget: int, inject_fault: bool = False):
    u = random_universe(rng)
    requests = list(enumerate_requests(u))
    sample = rng.sample(requests, min(REQUESTS_PER_TRIAL, len(requests)))
    if inject_fault:
        u, victim = corrupt_src(u, rng)
        if victim is not None:
            sample += list(requests_touching(u, victim.home_table))
    return soundness_check(u, sample, budget=budget)


def replay_monitor(rng: random.Random) -> ReferenceMonitor:
    monitor = ReferenceMonitor.open(":memory:", secret_key=f"replay-{rng.getrandbits(32)}")
    notes = NOTES_DB.format(invariant=rng.choice(REPLAY_INVARIANTS))
    with monitor.unit():
        monitor.integrate(parse_db_file(notes, "Notes"), notes)
        monitor.integrate(parse_db_file(BOARD_DB, "Board"), BOARD_DB)
        for spec in parse_wirings(BOARD_WIRING):
            monitor.add_wiring(spec)
    return monitor


def random_statement(rng: random.Random, users: list[str], n: int) -> tuple[str, str, str]:
    """(funit, uid, sql); roughly a third of them break a rule on purpose."""
    uid, other = rng.choice(users), rng.choice(users)
    choices = [
        ("Notes", f"INSERT INTO notes (owner, peer, body) VALUES ('{other}', '{rng.choice(users)}', 'n{n}')"),
        ("Notes", f"UPDATE notes SET body = 'e{n}' WHERE owner = '{other}'"),
        ("Notes", f"UPDATE notes SET owner = '{other}' WHERE owner = '{uid}'"),
        ("Notes", f"DELETE FROM notes WHERE peer = '{other}'"),
        ("Notes", "SELECT id, owner, body FROM notes"),
        ("Board", "SELECT key, owner, body FROM feed"),
        ("Board", f"INSERT INTO pins (owner, note) VALUES ('{uid}', 'Notes:{rng.randint(1, n + 1)}')"),
        ("Board", f"DELETE FROM pins WHERE owner = '{other}'"),
        ("Board", "SELECT body FROM notes"),
    ]
    funit, sql = rng.choice(choices)
    return funit, uid, sql


def replay_trial(rng: random.Random, run: SoundnessRun, budget: int, inject_fault: bool = False) -> None:
    monitor = replay_monitor(rng)
    users = [f"u{i}" for i in range(rng.randint(1, 3))]
    try:
        for n in range(STATEMENTS_PER_REPLAY):
            funit, uid, sql = random_statement(rng, users, n)
            before: Universe = monitor.snapshot_universe(users)
            if inject_fault:
                before, _ = corrupt_src(before, rng)
            session = monitor.open_session(funit, uid)
            run.statements += 1
            try:
                result = monitor.execute(session, sql)
            except MonitorError:
                continue
            run.accepted += 1
            for request in monitor.to_requests(session, result):
                if not sb(before, request):
                    run.violations.append(f"replay: engine accepted {request.describe()} ({sql}) but sb rejects it")
                elif not req_valid(before, request):
                    run.violations.append(f"replay: {request.describe()} ({sql}) is not valid in the model")
                run.evaluations += soundness_check(before, [request], budget=budget).evaluations
    finally:
        monitor.close()
    run.replays += 1


def run_soundness(trials: int, seed: int, budget: int = DEFAULT_BUDGET, replay_every: int = 10,
                  inject_fault: bool = False, progress: bool = True) -> SoundnessRun:
    """
    Args:
        trials: number of model trials.
        seed: seed of the single random generator; equal seeds give
            identical runs.
        budget: oracle evaluations allowed per soundness check.
        replay_every: run an engine replay after every this many trials;
            0 disables replays.
        inject_fault: corrupt the source of one stored item per trial.
        progress: show a tqdm progress bar.

    Raises:
        BudgetExceeded: when a single check exceeds `budget`.
    """
    rng = random.Random(seed)
    run = SoundnessRun(trials, seed)
    for trial in tqdm(range(trials), desc="soundness", unit="trial", disable=not progress):
        report = model_trial(rng, budget, inject_fault)
        run.checked += report.checked
        run.evaluations += report.evaluations
        run.violations += [f"model: {v}" for v in report.violations]
        if replay_every and (trial + 1) % replay_every == 0:
            replay_trial(rng, run, budget, inject_fault)
    logger.info(f"Soundness run with seed {seed}: {run.summary()}")
    return run

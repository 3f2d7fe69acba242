"""Random universes and request enumeration for soundness runs."""
from __future__ import annotations

import itertools
import random
from dataclasses import replace
from typing import Iterator

from src.model.universe import DataItem, Op, Request, Universe, UniverseBuilder

INPUT_POLICIES = ("all", "owner")


def random_universe(rng: random.Random, max_users: int = 3, max_components: int = 3,
                    max_tables: int = 4, max_items: int = 20) -> Universe:
    """
    Builds a universe the way the engine would populate one.

    Local rows carry the owning component as source. Input tables are
    instantiated per user and hold the provider's local rows that pass the
    provider's policy for that user, with the provider as source.
    """
    users = [f"u{i}" for i in range(rng.randint(1, max_users))]
    components = [f"c{i}" for i in range(rng.randint(1, max_components))]
    builder = UniverseBuilder().user(*users).component(*components)

    local: dict[str, str] = {}
    inputs: list[tuple[str, str, str, str]] = []
    for i in range(rng.randint(1, max_tables)):
        table = f"t{i}"
        consumer = rng.choice(components)
        providers = sorted({c for c in local.values() if c != consumer})
        if providers and rng.random() < 0.5:
            inputs.append((table, consumer, rng.choice(providers), rng.choice(INPUT_POLICIES)))
        else:
            local[table] = consumer
            builder.local_table(consumer, table)

    stored: list[DataItem] = []
    local_tables = sorted(local)
    for k in range(rng.randint(0, max_items)):
        table = rng.choice(local_tables)
        item = DataItem.create(
            id=f"{table}/{k}", home_table=table, owner=rng.choice(users), src=local[table],
            values={"n": k},
        )
        stored.append(item)
        builder.item(table, item)

    for table, consumer, provider, policy in inputs:
        builder.wiring(provider, consumer)
        for user in users:
            instance = f"{table}@{user}"
            builder.input_table(consumer, user, instance)
            for item in stored:
                if item.src != provider:
                    continue
                if policy == "owner" and item.owner != user:
                    continue
                builder.item(instance, replace(item, id=f"{instance}/{item.id}", home_table=instance))
    return builder.build()


def _filters(u: Universe, user: str, tables: frozenset[str]):
    yield None
    yield lambda d, user=user: d.owner == user
    items = sorted((d for t in tables for d in u.items(t)), key=lambda d: d.id)
    if items:
        first = items[0].id
        yield lambda d, first=first: d.id == first


def enumerate_requests(u: Universe) -> Iterator[Request]:
    """
    Yields requests for every (component, user) pair over single tables and
    pairs of tables drawn from the pair's readable tables plus one foreign
    table, for every operation and a few row filters.
    """
    all_tables = sorted(u.tables)
    for component in sorted(u.components):
        for user in sorted(u.users):
            own = u.lt.get(component, frozenset()) | u.it.get((component, user), frozenset())
            foreign = [t for t in all_tables if t not in own][:1]
            pool = sorted(own) + foreign
            subsets = [frozenset(s) for size in (1, 2) for s in itertools.combinations(pool, size)]
            for tables in subsets:
                yield Request.of(Op.SEL, tables, user, component)
                for op in (Op.UPD, Op.DEL):
                    for row_filter in _filters(u, user, tables):
                        yield Request.of(op, tables, user, component, row_filter=row_filter)
                if len(tables) == 1:
                    (table,) = tables
                    src = u.local_owner(table) or component
                    for owner in sorted({user, *sorted(u.users)[:1]}):
                        pending = DataItem.create(
                            id=f"{table}/new-{owner}", home_table=table, owner=owner, src=src,
                        )
                        yield Request.of(Op.INS, tables, user, component, pending=[pending])


def corrupt_src(u: Universe, rng: random.Random) -> tuple[Universe, DataItem | None]:
    """Rewrites the source of one stored local row to a foreign component."""
    candidates = sorted((d for t in u.local_tables() for d in u.items(t)), key=lambda d: d.id)
    if not candidates:
        return u, None
    victim = rng.choice(candidates)
    others = sorted(c for c in u.components if c != victim.src) or ["intruder"]
    corrupted = replace(victim, src=rng.choice(others))
    return u.with_item_replaced(victim, corrupted), corrupted


def requests_touching(u: Universe, table: str) -> Iterator[Request]:
    """Reads of `table` by its owning component, for every user."""
    component = u.local_owner(table)
    if component is None:
        return
    for user in sorted(u.users):
        yield Request.of(Op.SEL, [table], user, component)

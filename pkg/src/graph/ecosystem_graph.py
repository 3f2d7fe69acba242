"""Activation and sharing edges between components.

Activation edges (parent activates child) form a tree. Sharing edges
(provider feeds consumer through a wiring) are derived from wirings.
Their union, the combined graph, must stay acyclic; a mutation that would
close a cycle is rejected and leaves the graph untouched.
"""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import Iterable

from src.errors import GraphCycleError, UnknownComponentError

logger = logging.getLogger(__name__)

ACT = "act"
SH = "sh"


def sharing_edges(wirings: Iterable) -> set[tuple[str, str]]:
    """One (provider, consumer) edge per distinct pair of wired components."""
    return {(w.source_component, w.target_component) for w in wirings}


@dataclass
class EcosystemGraph:
    nodes: set[str] = field(default_factory=set)
    act_edges: set[tuple[str, str]] = field(default_factory=set)
    sh_edges: set[tuple[str, str]] = field(default_factory=set)

    def add_node(self, name: str) -> None:
        self.nodes.add(name)

    def remove_node(self, name: str) -> None:
        self.nodes.discard(name)
        self.act_edges = {e for e in self.act_edges if name not in e}
        self.sh_edges = {e for e in self.sh_edges if name not in e}

    def _require(self, *names: str) -> None:
        for name in names:
            if name not in self.nodes:
                raise UnknownComponentError(f"unknown component '{name}'")

    def successors(self, node: str) -> set[str]:
        return {b for a, b in self.act_edges | self.sh_edges if a == node}

    def _reaches(self, start: str, goal: str, extra: tuple[str, str] | None = None) -> bool:
        edges = self.act_edges | self.sh_edges | ({extra} if extra else set())
        adjacency: dict[str, set[str]] = {}
        for a, b in edges:
            adjacency.setdefault(a, set()).add(b)
        stack, seen = [start], {start}
        while stack:
            node = stack.pop()
            if node == goal:
                return True
            for nxt in adjacency.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return False

    def _check_acyclic_with(self, parent: str, child: str, kind: str) -> None:
        if parent == child:
            raise GraphCycleError(f"{kind} edge {parent} -> {child} is a self-loop")
        if self._reaches(child, parent):
            raise GraphCycleError(f"{kind} edge {parent} -> {child} would close a cycle")

    def add_activation(self, parent: str, child: str) -> None:
        """
        Adds an activation edge.

        Raises:
            UnknownComponentError: if either endpoint is not a node.
            GraphCycleError: if the edge would give `child` a second parent
                or close a cycle in the combined graph.
        """
        self._require(parent, child)
        if (parent, child) in self.act_edges:
            return
        self._check_acyclic_with(parent, child, ACT)
        other = [p for p, c in self.act_edges if c == child]
        if other:
            raise GraphCycleError(f"{child} is already activated by {other[0]}; activations form a tree")
        self.act_edges.add((parent, child))
        logger.info(f"Activation {parent} -> {child} registered")

    def add_sharing(self, provider: str, consumer: str) -> None:
        self._require(provider, consumer)
        if (provider, consumer) in self.sh_edges:
            return
        self._check_acyclic_with(provider, consumer, SH)
        self.sh_edges.add((provider, consumer))

    def can_share(self, provider: str, consumer: str) -> str | None:
        """Returns why a sharing edge would be rejected, or None."""
        try:
            self._require(provider, consumer)
            if (provider, consumer) not in self.sh_edges:
                self._check_acyclic_with(provider, consumer, SH)
        except (GraphCycleError, UnknownComponentError) as e:
            return str(e)
        return None

    def stale_closure(self, changed: str) -> set[str]:
        """All components reachable from `changed`, itself included."""
        self._require(changed)
        closure, stack = {changed}, [changed]
        while stack:
            for nxt in self.successors(stack.pop()):
                if nxt not in closure:
                    closure.add(nxt)
                    stack.append(nxt)
        return closure

    def rebuild_order(self, stale: Iterable[str]) -> list[str]:
        """Kahn's algorithm over the induced subgraph; ties break by name."""
        stale = set(stale)
        self._require(*sorted(stale))
        edges = {(a, b) for a, b in self.act_edges | self.sh_edges if a in stale and b in stale}
        indegree = {n: 0 for n in stale}
        for _, b in edges:
            indegree[b] += 1
        ready = [n for n, d in indegree.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            node = heapq.heappop(ready)
            order.append(node)
            for a, b in sorted(edges):
                if a == node:
                    indegree[b] -= 1
                    if indegree[b] == 0:
                        heapq.heappush(ready, b)
        return order

    def export(self) -> str:
        lines = [f"{a} -> {b} [{ACT}]" for a, b in sorted(self.act_edges)]
        lines += [f"{a} -> {b} [{SH}]" for a, b in sorted(self.sh_edges)]
        isolated = sorted(n for n in self.nodes if not any(n in e for e in self.act_edges | self.sh_edges))
        lines += isolated
        return "\n".join(lines)

    def copy(self) -> "EcosystemGraph":
        return EcosystemGraph(set(self.nodes), set(self.act_edges), set(self.sh_edges))

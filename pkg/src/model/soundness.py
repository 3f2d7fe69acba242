"""Brute-force check that the sandbox is at least as restrictive as the model."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

from src.errors import BudgetExceeded
from src.model.oracle import item_valid, req_valid, sb, scope_data
from src.model.universe import Request, Universe

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 10 ** 5


@dataclass(frozen=True)
class Violation:
    request: Request
    item_ids: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.request.describe()} admitted by sb but invalid for items {', '.join(self.item_ids)}"


@dataclass
class SoundnessReport:
    checked: int = 0
    evaluations: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def sound(self) -> bool:
        return not self.violations

    def merge(self, other: "SoundnessReport") -> None:
        self.checked += other.checked
        self.evaluations += other.evaluations
        self.violations.extend(other.violations)


def soundness_check(u: Universe, requests: Iterable[Request], budget: int = DEFAULT_BUDGET) -> SoundnessReport:
    """
    Evaluates `sb` and `req_valid` for every request and collects the ones
    where the sandbox admits what the model forbids.

    One evaluation is counted per request plus one per data item in its
    scope. Exceeding `budget` raises `BudgetExceeded` carrying the partial
    report.
    """
    report = SoundnessReport()
    for request in requests:
        scope = scope_data(u, request)
        cost = 1 + len(scope)
        if report.evaluations + cost > budget:
            raise BudgetExceeded(
                f"soundness budget of {budget} evaluations exhausted after {report.checked} requests",
                report=report,
            )
        report.evaluations += cost
        report.checked += 1

        if sb(u, request) and not req_valid(u, request):
            offending = tuple(sorted(d.id for d in scope if not item_valid(u, request, d)))
            violation = Violation(request, offending)
            logger.warning(f"Soundness violation: {violation}")
            report.violations.append(violation)
    return report

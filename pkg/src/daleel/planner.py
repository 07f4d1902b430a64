"""Deployment planning: score (instance, day) candidates on time and billed cost."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

from daleel.portfolio import Constraints, InstanceSpec, validate_constraints
from daleel.regress import FittedModel, predict

log = logging.getLogger(__name__)

DAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


class NoFeasibleCandidate(Exception):
    def __init__(self, binding: str, detail: str = ""):
        self.binding = binding
        msg = f"no feasible candidate (binding constraint: {binding})"
        super().__init__(f"{msg}: {detail}" if detail else msg)


@dataclass(frozen=True)
class BillingPolicy:
    granularity_s: int = 3600

    def __post_init__(self):
        if int(self.granularity_s) != self.granularity_s or self.granularity_s <= 0:
            raise ValueError(f"granularity_s must be a positive integer, got {self.granularity_s}")

    def units(self, seconds: float) -> int:
        return math.ceil(seconds / self.granularity_s)

    def cost(self, price_per_hour: float, seconds: float) -> float:
        return price_per_hour * (self.units(seconds) * self.granularity_s / 3600)


@dataclass(frozen=True)
class Candidate:
    instance: InstanceSpec
    day: int
    predicted_time_s: float
    billed_cost_usd: float
    score: Optional[float] = None

    @property
    def sort_key(self):
        return (self.score, self.billed_cost_usd, self.instance.name, self.day)


def enumerate_candidates(portfolio: Sequence[InstanceSpec], constraints: Constraints,
                         model: FittedModel, billing: BillingPolicy = BillingPolicy()) -> list:
    """One unscored candidate per (instance, allowed day), in portfolio then day order."""
    if not portfolio:
        raise ValueError("portfolio is empty")
    c = validate_constraints(constraints)
    out = []
    for inst in portfolio:
        for day in c.allowed_days:
            t = predict(model, (inst.ram_gb, inst.vcpu, day))
            if not t > 0:
                log.warning("INVALID candidate %s day %d: predicted time %.6g s is not positive",
                            inst.name, day, t)
                continue
            out.append(Candidate(inst, day, t, billing.cost(inst.price_per_hour, t)))
    return out


def _minmax(values):
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0] * len(values)
    span = hi - lo
    return [(v - lo) / span for v in values]


def weighted_sum(times: Sequence[float], costs: Sequence[float], weights) -> list:
    """Min-max normalize each criterion, then combine as w_time*T + w_cost*C."""
    w_time, w_cost = weights
    return [w_time * t + w_cost * c for t, c in zip(_minmax(times), _minmax(costs))]


ScoringStrategy = Callable[[Sequence[float], Sequence[float], tuple], list]


def feasible(candidates, constraints: Constraints) -> list:
    c = validate_constraints(constraints)
    survivors = list(candidates)
    if not survivors:
        raise NoFeasibleCandidate("none", "no candidates to rank")
    if c.max_execution_time_s is not None:
        survivors = [x for x in survivors if x.predicted_time_s <= c.max_execution_time_s]
        if not survivors:
            fastest = min(x.predicted_time_s for x in candidates)
            raise NoFeasibleCandidate(
                "max_execution_time",
                f"fastest candidate needs {fastest:.2f} s > {c.max_execution_time_s} s",
            )
    if c.budget_usd is not None:
        within = [x for x in survivors if x.billed_cost_usd <= c.budget_usd]
        if not within:
            cheapest = min(x.billed_cost_usd for x in survivors)
            raise NoFeasibleCandidate(
                "budget", f"cheapest billed cost ${cheapest:.4f} exceeds budget ${c.budget_usd}"
            )
        survivors = within
    return survivors


def rank(candidates, constraints: Constraints,
         strategy: ScoringStrategy = weighted_sum) -> list:
    """Filter by constraints, score, and sort ascending (lower score is better)."""
    c = validate_constraints(constraints)
    survivors = feasible(candidates, c)
    scores = strategy([x.predicted_time_s for x in survivors],
                      [x.billed_cost_usd for x in survivors], c.weights)
    scored = [replace(x, score=s) for x, s in zip(survivors, scores)]
    return sorted(scored, key=lambda x: x.sort_key)


def recommend(portfolio, constraints, model, billing: BillingPolicy = BillingPolicy(),
              strategy: ScoringStrategy = weighted_sum) -> list:
    return rank(enumerate_candidates(portfolio, constraints, model, billing), constraints, strategy)


def to_records(ranked) -> list:
    return [
        {
            "instance": x.instance.name,
            "day": x.day,
            "predicted_time_s": x.predicted_time_s,
            "billed_cost_usd": x.billed_cost_usd,
            "score": x.score,
            "rank": i,
        }
        for i, x in enumerate(ranked, start=1)
    ]


def write_recommendation(ranked, path) -> None:
    Path(path).write_text(json.dumps(to_records(ranked), indent=2) + "\n")


def format_table(ranked, limit: Optional[int] = None) -> str:
    rows = ranked if limit is None else ranked[:limit]
    lines = [f"{'rank':>4}  {'instance':<12} {'day':<4} {'time_s':>10} {'cost_usd':>9} {'score':>7}"]
    for i, x in enumerate(rows, start=1):
        lines.append(
            f"{i:>4}  {x.instance.name:<12} {DAY_NAMES[x.day - 1]:<4} "
            f"{x.predicted_time_s:>10.2f} {x.billed_cost_usd:>9.4f} {x.score:>7.4f}"
        )
    return "\n".join(lines)

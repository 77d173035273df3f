"""Unitless plan cost: each call site costs its base weight times gamma**depth.

The weights separate call tiers (cached tool call vs. LLM call) and the
nesting penalty makes calls inside loops dearer.  The number only ranks
candidate plans; it is not a latency prediction in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .cfg import CallSite, PlanCfg, build_cfg
from .errors import EmptyCandidateSet
from .planlang import PlanProgram


@dataclass(frozen=True)
class CostModel:
    c_tool: float = 0.1
    c_eval: float = 10.0
    gamma: float = 10.0

    def __post_init__(self):
        if self.c_tool < 0 or self.c_eval < 0:
            raise ValueError("call weights must be nonnegative")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")

    def site_cost(self, site: CallSite) -> float:
        base = self.c_tool if site.kind == "tool" else self.c_eval
        return base * self.gamma ** site.depth


@dataclass(frozen=True)
class CostEstimate:
    total: float
    per_call: tuple   # ((CallSite, contribution), ...)

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "total": self.total,
            "per_call": [{"call": s.label, "line": s.span[0], "col": s.span[1],
                          "depth": s.depth, "cost": c} for s, c in self.per_call],
        }


def estimate_cost(cfg: PlanCfg | PlanProgram, model: CostModel | None = None) -> CostEstimate:
    """Sum the cost of every call site, counting both arms of each branch."""
    if isinstance(cfg, PlanProgram):
        cfg = build_cfg(cfg)
    model = model or CostModel()
    per_call = tuple((s, model.site_cost(s)) for s in cfg.call_sites())
    return CostEstimate(math.fsum(c for _, c in per_call), per_call)


def rank(candidates: Iterable[Sequence]):
    """Pick the cheapest ``(plan, cost, ...)`` entry; ties go to the earliest.

    Returns the whole winning entry.
    """
    best = None
    for cand in candidates:
        if best is None or cand[1] < best[1]:
            best = cand
    if best is None:
        raise EmptyCandidateSet("no valid candidate plans to rank")
    return best

"""Parallel plan search: sample, validate, cost, retry with feedback, pick the cheapest.

Each worker owns a random stream split from the master seed and keeps a
simulated clock fed by generator latencies.  Collection stops once
``k_valid`` valid plans exist; the outcome keeps exactly the valid plans
that finished no later than the k-th one, so the result does not depend on
thread scheduling.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence

import numpy as np

from .cost import CostModel, estimate_cost, rank
from .distributions import LatencyDistribution
from .errors import ParseError, PlanSchemaError
from .planlang import PlanProgram, load_plan
from .protocol import ToolManifest
from .validator import PARSE_ERROR, ValidationReport, Violation, make_report, validate


@dataclass(frozen=True)
class PlannerConfig:
    n_workers: int = 8
    k_valid: int = 32
    m_max: int = 1
    cost_model: CostModel = field(default_factory=CostModel)
    seed: int = 0

    def __post_init__(self):
        for name in ("n_workers", "k_valid", "m_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class Generation:
    text: str
    latency_s: float = 0.0


class PlanGenerator(Protocol):
    def generate(self, task: str, manifests: Mapping[str, ToolManifest], feedback: str | None,
                 rng: np.random.Generator, *, worker_id: int = 0,
                 attempt: int = 0) -> Generation | str:
        ...


class CorpusGenerator:
    """Round-robin over a fixed list of plan texts."""

    def __init__(self, plans: Sequence[str], latency: LatencyDistribution | None = None):
        if not plans:
            raise ValueError("corpus generator needs at least one plan")
        self.plans = list(plans)
        self.latency = latency

    @classmethod
    def from_dir(cls, path, latency=None) -> "CorpusGenerator":
        files = sorted(p for p in Path(path).iterdir() if p.suffix in (".plan", ".json"))
        return cls([p.read_text() for p in files], latency)

    def generate(self, task, manifests, feedback, rng, *, worker_id=0, attempt=0):
        text = self.plans[(worker_id + attempt) % len(self.plans)]
        lat = float(self.latency.sample(rng)) if self.latency is not None else 0.0
        return Generation(text, lat)


class BernoulliMockGenerator:
    """Emits ``valid_plan`` with probability ``p`` and ``invalid_plan`` otherwise."""

    def __init__(self, valid_plan: str, invalid_plan: str, p: float,
                 latency: LatencyDistribution | None = None):
        if not 0 <= p <= 1:
            raise ValueError("p must lie in [0, 1]")
        self.valid_plan = valid_plan
        self.invalid_plan = invalid_plan
        self.p = p
        self.latency = latency

    def generate(self, task, manifests, feedback, rng, *, worker_id=0, attempt=0):
        ok = rng.random() < self.p
        lat = float(self.latency.sample(rng)) if self.latency is not None else 0.0
        return Generation(self.valid_plan if ok else self.invalid_plan, lat)


@dataclass(frozen=True)
class Candidate:
    plan: str
    cost: float
    worker_id: int
    iteration: int
    elapsed: float
    program: PlanProgram | None = field(default=None, compare=False, repr=False)

    def to_json(self) -> dict:
        return {"plan": self.plan, "cost": self.cost, "worker_id": self.worker_id,
                "iteration": self.iteration, "elapsed_s": self.elapsed}


@dataclass(frozen=True)
class Rejection:
    plan: str
    report: ValidationReport
    worker_id: int
    iteration: int
    elapsed: float

    def to_json(self) -> dict:
        return {"plan": self.plan, "report": self.report.to_json(),
                "worker_id": self.worker_id, "iteration": self.iteration,
                "elapsed_s": self.elapsed}


@dataclass(frozen=True)
class PlannerOutcome:
    selected: Candidate | None
    candidates: tuple = ()
    rejected: tuple = ()

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "selected": self.selected.to_json() if self.selected else None,
            "candidates": [c.to_json() for c in self.candidates],
            "rejected": [r.to_json() for r in self.rejected],
        }


def render_feedback(report: ValidationReport) -> str:
    """One line per hard violation, in report order; empty when the plan is valid."""
    lines = []
    for v in report.errors:
        where = f"line {v.span[0]}, col {v.span[1]}"
        tool = f" at call {v.tool}" if v.tool else ""
        lines.append(f"{v.kind}{tool} ({where}): {v.detail}")
    return "\n".join(lines)


def _check(text, manifests, initial_state, model):
    try:
        program = load_plan(text)
    except (ParseError, PlanSchemaError, ValueError) as exc:
        line = getattr(exc, "line", 0)
        col = getattr(exc, "col", 0)
        return None, make_report([Violation(PARSE_ERROR, str(exc), (line, col))], {}), None
    report = validate(program, manifests, initial_state)
    cost = estimate_cost(program, model).total if report.valid else None
    return program, report, cost


class _Collector:
    def __init__(self, k):
        self.k = k
        self.lock = threading.Lock()
        self.valid_times: list[float] = []

    def add(self, t):
        with self.lock:
            self.valid_times.append(t)
            self.valid_times.sort()

    def threshold(self) -> float:
        with self.lock:
            return self.valid_times[self.k - 1] if len(self.valid_times) >= self.k else math.inf


def plan(task: str, manifests: Mapping[str, ToolManifest], generator: PlanGenerator,
         config: PlannerConfig | None = None,
         initial_state: Mapping[str, Any] | None = None) -> PlannerOutcome:
    """Search for the cheapest valid plan; ``selected`` is None when none was found."""
    config = config or PlannerConfig()
    if not manifests:
        raise ValueError("planning needs at least one tool manifest")
    streams = [np.random.default_rng(s)
               for s in np.random.SeedSequence(config.seed).spawn(config.n_workers)]
    collector = _Collector(config.k_valid)

    def worker(wid):
        rng = streams[wid]
        clock = 0.0
        feedback = None
        results = []
        for attempt in range(config.m_max):
            if clock > collector.threshold():
                break
            gen = generator.generate(task, manifests, feedback, rng,
                                     worker_id=wid, attempt=attempt)
            if isinstance(gen, str):
                gen = Generation(gen)
            clock += max(0.0, float(gen.latency_s))
            program, report, cost = _check(gen.text, manifests, initial_state,
                                           config.cost_model)
            if report.valid:
                results.append(Candidate(gen.text, cost, wid, attempt, clock, program))
                collector.add(clock)
                break
            results.append(Rejection(gen.text, report, wid, attempt, clock))
            feedback = render_feedback(report)
        return results

    with ThreadPoolExecutor(max_workers=config.n_workers) as pool:
        per_worker = list(pool.map(worker, range(config.n_workers)))

    cutoff = collector.threshold()
    found = [r for rs in per_worker for r in rs if r.elapsed <= cutoff]
    order = lambda r: (r.elapsed, r.worker_id, r.iteration)  # noqa: E731
    candidates = tuple(sorted((r for r in found if isinstance(r, Candidate)), key=order))
    rejected = tuple(sorted((r for r in found if isinstance(r, Rejection)), key=order))
    selected = rank((c, c.cost) for c in candidates)[0] if candidates else None
    return PlannerOutcome(selected, candidates, rejected)

"""Monte Carlo strategy selection over predicted element usage.

A usage plan lists which UI elements a task touches, how often, and how
many page navigations each causes.  Latencies of first interactions are
drawn from the scheduler cache; repeats cost a fixed ``c_repeat`` and every
page visited costs ``c_read``.  Three strategies are compared:

* Serial: one worker runs the whole plan.
* Hedge: ``n_workers`` replicas run it and the fastest wins, plus ``delta_h``.
* Parallel: independent sub-tasks are spread over workers in batches of
  ``n_workers``; batch maxima add up, plus ``delta_p`` once.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .distributions import ElementStats, LatencyDistribution
from .errors import NotParallelizable, UnknownElement


class Strategy(str, Enum):
    SERIAL = "Serial"
    PARALLEL = "Parallel"
    HEDGE = "Hedge"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            for member in cls:
                if member.value.lower() == value.lower():
                    return member
        return None


@dataclass(frozen=True)
class SchedulerConfig:
    n_mc: int = 1000
    n_workers: int = 4
    delta_p: float = 20.0
    delta_h: float = 5.0
    c_read: float = 5.0
    c_repeat: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.n_mc < 1 or self.n_workers < 1:
            raise ValueError("n_mc and n_workers must be >= 1")
        if min(self.delta_p, self.delta_h, self.c_read, self.c_repeat) < 0:
            raise ValueError("overheads and page costs must be nonnegative")


@dataclass(frozen=True)
class UsageEntry:
    element: str
    count: int = 1
    navigations: int = 0

    def __post_init__(self):
        if self.count < 0 or self.navigations < 0:
            raise ValueError(f"{self.element}: count and navigations must be >= 0")

    def to_json(self):
        return {"element": self.element, "count": self.count, "navigations": self.navigations}

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            return cls(doc)
        return cls(doc["element"], int(doc.get("count", 1)), int(doc.get("navigations", 0)))


def _entries(docs) -> tuple:
    return tuple(UsageEntry.from_json(d) for d in docs)


@dataclass(frozen=True)
class ParallelSplit:
    num_workers: int
    per_worker: tuple                # one tuple of UsageEntry per worker
    rediscovery: tuple = ()          # element names every worker must find again
    prefix: tuple = ()               # sequential work done before the fan-out

    def __post_init__(self):
        if self.num_workers < 1:
            raise ValueError("num_workers must be >= 1")
        if len(self.per_worker) != self.num_workers:
            raise ValueError(f"per_worker lists {len(self.per_worker)} workers, "
                             f"expected {self.num_workers}")

    def worker_entries(self, w) -> tuple:
        found = tuple(UsageEntry(e, 1, 1) for e in self.rediscovery)
        return found + tuple(self.per_worker[w])

    def to_json(self):
        return {"num_workers": self.num_workers,
                "per_worker": [[e.to_json() for e in ws] for ws in self.per_worker],
                "rediscovery": list(self.rediscovery),
                "prefix": [e.to_json() for e in self.prefix]}

    @classmethod
    def from_json(cls, doc):
        n = int(doc["num_workers"])
        if "per_worker" in doc:
            per = tuple(_entries(ws) for ws in doc["per_worker"])
        else:
            per = (_entries(doc.get("worker_usage", [])),) * n
        return cls(n, per, tuple(doc.get("rediscovery", ())), _entries(doc.get("prefix", ())))


@dataclass(frozen=True)
class UsagePlan:
    sequential: tuple
    parallelizable: bool = False
    parallel: ParallelSplit | None = None
    task: str = ""

    def to_json(self):
        return {"schema_version": 1, "task": self.task,
                "sequential": [e.to_json() for e in self.sequential],
                "parallelizable": self.parallelizable,
                "parallel": self.parallel.to_json() if self.parallel else None}

    @classmethod
    def from_json(cls, doc):
        par = doc.get("parallel")
        return cls(_entries(doc.get("sequential", [])), bool(doc.get("parallelizable", False)),
                   ParallelSplit.from_json(par) if par else None, doc.get("task", ""))


def load_usage(path) -> dict[str, UsagePlan]:
    """Read a usage fixture: a single plan, or ``{"tasks": {task: plan}}``."""
    doc = json.loads(Path(path).read_text())
    if "tasks" in doc:
        return {t: UsagePlan.from_json({**d, "task": t}) for t, d in doc["tasks"].items()}
    plan = UsagePlan.from_json(doc)
    return {plan.task: plan}


class FixtureUsageProvider:
    """Usage predictions read from fixtures instead of a language model."""

    def __init__(self, plans: Mapping[str, UsagePlan] | UsagePlan):
        self.plans = {plans.task: plans} if isinstance(plans, UsagePlan) else dict(plans)

    def __call__(self, task: str) -> UsagePlan:
        if task in self.plans:
            return self.plans[task]
        if len(self.plans) == 1:
            return next(iter(self.plans.values()))
        raise KeyError(f"no usage fixture for task {task!r}")


# -- single trials ----------------------------------------------------------

Cache = Mapping[str, "ElementStats | LatencyDistribution"]
Draw = Callable[[str], float]


def _dist(cache: Cache, element) -> LatencyDistribution:
    try:
        entry = cache[element]
    except KeyError:
        raise UnknownElement(element) from None
    return entry.distribution if isinstance(entry, ElementStats) else entry


def _drawer(cache: Cache, rng) -> Draw:
    if callable(rng) and not isinstance(rng, np.random.Generator):
        return lambda e: (_dist(cache, e), float(rng(e)))[1]
    return lambda e: float(_dist(cache, e).sample(rng))


def _serial_cost(entries: Sequence[UsageEntry], draw: Draw, config: SchedulerConfig) -> float:
    total = 0.0
    navs = 0
    for e in entries:
        if e.count == 0:
            continue
        total += draw(e.element) + (e.count - 1) * config.c_repeat
        navs += e.navigations
    return total + (1 + navs) * config.c_read


def estimate_serial_trial(usage: UsagePlan, cache: Cache, config: SchedulerConfig,
                          rng) -> float:
    """One serial trial.  ``rng`` is a Generator or a callable ``element -> seconds``."""
    return _serial_cost(usage.sequential, _drawer(cache, rng), config)


def estimate_hedge_trial(usage: UsagePlan, cache: Cache, config: SchedulerConfig,
                         rng) -> float:
    draw = _drawer(cache, rng)
    return min(_serial_cost(usage.sequential, draw, config)
               for _ in range(config.n_workers)) + config.delta_h


def _batches(n, size):
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


def estimate_parallel_trial(usage: UsagePlan, cache: Cache, config: SchedulerConfig,
                            rng) -> float:
    if not usage.parallelizable or usage.parallel is None:
        raise NotParallelizable("usage plan declares no parallel split")
    split = usage.parallel
    draw = _drawer(cache, rng)
    total = _serial_cost(split.prefix, draw, config) if split.prefix else 0.0
    workers = [_serial_cost(split.worker_entries(w), draw, config)
               for w in range(split.num_workers)]
    for batch in _batches(split.num_workers, config.n_workers):
        total += max(workers[w] for w in batch)
    return total + config.delta_p


# -- vectorised Monte Carlo -------------------------------------------------

def _stream(seed, name) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode())]))


def _serial_many(entries, cache, config, rng, n) -> np.ndarray:
    total = np.zeros(n)
    navs = 0
    for e in entries:
        if e.count == 0:
            continue
        total += _dist(cache, e.element).sample(rng, n) + (e.count - 1) * config.c_repeat
        navs += e.navigations
    return total + (1 + navs) * config.c_read


def _trials(strategy, usage, cache, config) -> np.ndarray:
    n, seed = config.n_mc, config.seed
    if strategy is Strategy.SERIAL:
        return _serial_many(usage.sequential, cache, config, _stream(seed, "S"), n)
    if strategy is Strategy.HEDGE:
        reps = [_serial_many(usage.sequential, cache, config, _stream(seed, f"H{r}"), n)
                for r in range(config.n_workers)]
        return np.min(reps, axis=0) + config.delta_h
    split = usage.parallel
    total = (_serial_many(split.prefix, cache, config, _stream(seed, "Pseq"), n)
             if split.prefix else np.zeros(n))
    workers = [_serial_many(split.worker_entries(w), cache, config, _stream(seed, f"P{w}"), n)
               for w in range(split.num_workers)]
    for batch in _batches(split.num_workers, config.n_workers):
        total = total + np.max([workers[w] for w in batch], axis=0)
    return total + config.delta_p


@dataclass(frozen=True)
class StrategyEstimate:
    strategy: Strategy
    mean_s: float
    trials: np.ndarray = field(compare=False, repr=False)
    win_rate: float = 0.0

    def to_json(self, include_trials=False):
        doc = {"strategy": self.strategy.value, "mean_s": self.mean_s,
               "std_s": float(np.std(self.trials)), "win_rate": self.win_rate}
        if include_trials:
            doc["trials"] = [float(t) for t in self.trials]
        return doc


@dataclass(frozen=True)
class ScheduleDecision:
    selected: Strategy
    estimates: tuple

    def estimate(self, strategy) -> StrategyEstimate:
        return next(e for e in self.estimates if e.strategy == Strategy(strategy))

    def to_json(self):
        return {"schema_version": 1, "selected": self.selected.value,
                "estimates": [e.to_json() for e in self.estimates]}


def applicable_strategies(usage: UsagePlan) -> list[Strategy]:
    out = [Strategy.SERIAL, Strategy.HEDGE]
    if usage.parallelizable and usage.parallel is not None:
        out.append(Strategy.PARALLEL)
    return out


def estimate_strategies(usage: UsagePlan, cache: Cache,
                        config: SchedulerConfig | None = None) -> ScheduleDecision:
    config = config or SchedulerConfig()
    strategies = applicable_strategies(usage)
    runs = {s: _trials(s, usage, cache, config) for s in strategies}
    estimates = []
    for s in strategies:
        others = [runs[o] for o in strategies if o is not s]
        wins = np.all([runs[s] < o for o in others], axis=0) if others else np.ones(config.n_mc)
        estimates.append(StrategyEstimate(s, float(np.mean(runs[s])), runs[s],
                                          float(np.mean(wins))))
    best = min(estimates, key=lambda e: e.mean_s)   # first minimum keeps list order on ties
    return ScheduleDecision(best.strategy, tuple(estimates))


def select_strategy(task: str, usage_provider, cache: Cache,
                    config: SchedulerConfig | None = None) -> ScheduleDecision:
    """Predict usage for ``task`` and return the strategy with the lowest mean latency."""
    return estimate_strategies(usage_provider(task), cache, config)


def analytic_serial_mean(usage: UsagePlan, cache: Cache, config: SchedulerConfig) -> float:
    """Closed-form expected serial latency (used as a test oracle)."""
    navs = sum(e.navigations for e in usage.sequential if e.count)
    return math.fsum(_dist(cache, e.element).mean() + (e.count - 1) * config.c_repeat
                     for e in usage.sequential if e.count) + (1 + navs) * config.c_read

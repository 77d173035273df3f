"""Generated fixture sets for the end-to-end checks.

* ``scheduler_suite``: usage plans with ground-truth latencies in three
  regimes (low variance, heavy tail, parallelizable).
* ``cost_corpus``: plans mixing tool calls, ``eval`` calls and loops.
* ``random_contract_world`` / ``random_plan``: concrete-contract manifests
  and plans for validator fuzzing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import Fixed, Gamma, LogNormal, Weibull
from .planlang import AiEval, Assign, BinOp, For, If, ListExpr, Literal, PlanProgram, ToolCall, Var
from .protocol import Concrete, ToolManifest
from .scheduler import ParallelSplit, SchedulerConfig, UsageEntry, UsagePlan
from .simulator import SimEnv, fixture_from_usage, run_plan
from .traces import build_scheduler_cache, ingest_records

LOW_VARIANCE = "low-variance"
HEAVY_TAIL = "heavy-tail"
PARALLELIZABLE = "parallelizable"


@dataclass(frozen=True)
class SuiteFixture:
    name: str
    category: str
    usage: UsagePlan
    true_latency: dict


def _low_variance(rng, i):
    n = int(rng.integers(2, 6))
    entries, lat = [], {}
    for j in range(n):
        el = f"lv{i}_el{j}"
        lat[el] = Weibull(float(rng.uniform(6, 12)), float(rng.uniform(4, 12)))
        entries.append(UsageEntry(el, int(rng.integers(1, 3)), int(rng.integers(0, 2))))
    return UsagePlan(tuple(entries), False, None, f"low-variance-{i}"), lat


def _heavy_tail(rng, i):
    n = int(rng.integers(2, 5))
    entries, lat = [], {}
    for j in range(n):
        el = f"ht{i}_el{j}"
        if j == 0:
            lat[el] = Gamma(float(rng.uniform(0.7, 1.2)), float(rng.uniform(25, 45)))
        else:
            lat[el] = LogNormal.from_moments(float(rng.uniform(10, 30)),
                                             float(rng.uniform(8, 20)))
        entries.append(UsageEntry(el, 1, int(rng.integers(0, 2))))
    return UsagePlan(tuple(entries), False, None, f"heavy-tail-{i}"), lat


def _parallel(rng, i):
    workers = int(rng.integers(3, 9))
    nav = f"par{i}_card"
    item = f"par{i}_item"
    action = f"par{i}_action"
    lat = {nav: Weibull(float(rng.uniform(4, 8)), float(rng.uniform(6, 10))),
           item: Weibull(float(rng.uniform(4, 8)), float(rng.uniform(8, 14))),
           action: Fixed(float(rng.uniform(8, 14)))}
    per = tuple((UsageEntry(item, 1, 1), UsageEntry(action, 1, 0)) for _ in range(workers))
    seq = (UsageEntry(nav, 1, 1), UsageEntry(item, workers, workers),
           UsageEntry(action, workers, 0))
    split = ParallelSplit(workers, per, rediscovery=(nav,))
    return UsagePlan(seq, True, split, f"parallel-{i}"), lat


def scheduler_suite(seed: int = 0, per_category: int = 10) -> list[SuiteFixture]:
    rng = np.random.default_rng(seed)
    out = []
    for cat, maker in ((LOW_VARIANCE, _low_variance), (HEAVY_TAIL, _heavy_tail),
                       (PARALLELIZABLE, _parallel)):
        for i in range(per_category):
            usage, lat = maker(rng, i)
            out.append(SuiteFixture(usage.task, cat, usage, lat))
    return out


def probe_cache(fixture: SuiteFixture, config: SchedulerConfig, n_probe: int = 40,
                seed: int = 0):
    """Fit a scheduler cache from simulated traces touching each element once."""
    elements = sorted(fixture.true_latency)
    usage = UsagePlan(tuple(UsageEntry(e, 1, 0) for e in elements), task=fixture.name)
    program, env = fixture_from_usage(usage, fixture.true_latency, config)
    rng = np.random.default_rng(seed)
    records = [run_plan(program, {}, env, rng).trace for _ in range(n_probe)]
    return build_scheduler_cache(ingest_records(records))


# -- cost-ranking corpus ----------------------------------------------------

CORPUS_TOOLS = tuple(f"tool{i}" for i in range(5))


def corpus_env(seed: int = 0) -> SimEnv:
    rng = np.random.default_rng(seed)
    lat = {t: Gamma.from_moments(float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.1, 0.5)))
           for t in CORPUS_TOOLS}
    return SimEnv(tool_latency=lat, eval_latency=LogNormal.from_moments(10.0, 2.5))


def _corpus_calls(rng, n_tools, n_evals, tag):
    calls = [ToolCall(str(rng.choice(CORPUS_TOOLS))) for _ in range(n_tools)]
    calls += [_eval(f"{tag} judgment {k}") for k in range(n_evals)]
    order = rng.permutation(len(calls))
    return [calls[i] for i in order]


def _eval(template):
    return AiEval(template)


def random_corpus_plan(rng) -> PlanProgram:
    stmts = _corpus_calls(rng, int(rng.integers(0, 5)), int(rng.integers(0, 3)), "top")
    if rng.random() < 0.6:
        body = _corpus_calls(rng, int(rng.integers(1, 4)), int(rng.random() < 0.3), "loop")
        stmts.append(For("item", ListExpr((Literal(1), Literal(2), Literal(3))), tuple(body)))
    if not stmts:
        stmts = [ToolCall(CORPUS_TOOLS[0])]
    return PlanProgram(tuple(stmts))


def cost_corpus(n: int = 50, seed: int = 0) -> list[PlanProgram]:
    rng = np.random.default_rng(seed)
    return [random_corpus_plan(rng) for _ in range(n)]


# -- validator fuzzing ------------------------------------------------------

FUZZ_KEYS = ("page", "modal", "mode")
FUZZ_VALUES = ("a", "b", "c")


def _state_block(rng, max_keys):
    keys = rng.choice(FUZZ_KEYS, size=int(rng.integers(0, max_keys + 1)), replace=False)
    return {str(k): Concrete(str(rng.choice(FUZZ_VALUES))) for k in keys}


def random_contract_world(rng, n_tools: int = 6):
    """Manifests with concrete pre/post patterns and a random initial state."""
    manifests = {}
    for i in range(n_tools):
        name = f"t{i}"
        manifests[name] = ToolManifest(name, pre=_state_block(rng, 2), post=_state_block(rng, 2))
    initial = {str(k): str(rng.choice(FUZZ_VALUES)) for k in FUZZ_KEYS if rng.random() < 0.8}
    env = SimEnv(initial_state=initial, tool_latency={t: Fixed(0.1) for t in manifests})
    return manifests, initial, env


def _random_block(rng, tools, depth, budget):
    stmts = []
    for _ in range(int(rng.integers(1, 4))):
        if budget[0] <= 0:
            break
        r = rng.random()
        if r < 0.6 or depth >= 2:
            stmts.append(ToolCall(str(rng.choice(tools))))
            budget[0] -= 1
        elif r < 0.8:
            n = int(rng.integers(0, 3))
            stmts.append(For("i", ListExpr(tuple(Literal(k) for k in range(n))),
                             tuple(_random_block(rng, tools, depth + 1, budget))))
        else:
            cond = BinOp("<", Var("flag"), Literal(int(rng.integers(0, 3))))
            orelse = tuple(_random_block(rng, tools, depth + 1, budget)) if rng.random() < 0.5 \
                else ()
            stmts.append(If(cond, tuple(_random_block(rng, tools, depth + 1, budget)), orelse))
    return stmts


def random_plan(rng, manifests) -> PlanProgram:
    tools = sorted(manifests)
    flag = Assign("flag", Literal(int(rng.integers(0, 3))))
    body = _random_block(rng, tools, 0, [int(rng.integers(2, 8))])
    return PlanProgram((flag, *body))


def swap_mutant(rng, program: PlanProgram) -> PlanProgram | None:
    """Swap the tool names of two call sites, or None when fewer than two exist."""
    calls = [s for s in program.walk() if isinstance(s, ToolCall)]
    if len(calls) < 2:
        return None
    i, j = rng.choice(len(calls), size=2, replace=False)
    a, b = calls[i], calls[j]

    def rewrite(stmts):
        out = []
        for s in stmts:
            if s is a:
                s = ToolCall(b.tool, a.args, a.bind, a.span)
            elif s is b:
                s = ToolCall(a.tool, b.args, b.bind, b.span)
            elif isinstance(s, For):
                s = For(s.var, s.iterable, tuple(rewrite(s.body)), s.span)
            elif isinstance(s, If):
                s = If(s.cond, tuple(rewrite(s.then)), tuple(rewrite(s.orelse)), s.span)
            out.append(s)
        return out

    return PlanProgram(tuple(rewrite(program.statements)))

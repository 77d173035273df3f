"""Simulated execution of plans, used as ground truth for cost ranking and scheduling.

Time is simulated: every tool call advances a clock by a draw from its
latency distribution, ``eval`` calls by a draw from the eval latency.  The
page state is concrete and each call checks its precondition against it
before applying its postcondition.
"""

from __future__ import annotations

import hashlib
import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .distributions import Fixed, LatencyDistribution
from .errors import NotParallelizable, RuntimePreconditionFailure, SimulationError
from .planlang import (AiEval, Assign, Attr, BinOp, For, FuncCall, If, Index, ListExpr,
                       Literal, PlanProgram, Return, Slice, ToolCall, UnaryOp, Var, load_plan)
from .protocol import (AnyValue, Concrete, Null, OneOf, ParamRef, ToolManifest, ValueSchema,
                       render_pattern, satisfies)
from .scheduler import SchedulerConfig, Strategy, UsagePlan, _batches
from .traces import TraceRecord, TraceStep

MAX_LOOP_ITERATIONS = 100_000


@dataclass(frozen=True)
class ParallelPlans:
    workers: tuple                     # PlanProgram per worker
    prefix: PlanProgram | None = None


@dataclass(frozen=True)
class SimEnv:
    """Static description of a simulated application.

    ``read_cost`` is charged once per run and once per navigation; when
    ``repeat_cost`` is set, calls after the first to the same tool cost that
    fixed amount instead of a latency draw (and cause no navigation).
    """

    initial_state: Mapping[str, Any] = field(default_factory=dict)
    tool_latency: Mapping[str, LatencyDistribution] = field(default_factory=dict)
    eval_latency: LatencyDistribution = Fixed(0.0)
    eval_answers: Mapping[str, Any] = field(default_factory=dict)
    tool_returns: Mapping[str, Any] = field(default_factory=dict)
    navigations: Mapping[str, int] = field(default_factory=dict)
    elements: Mapping[str, str] = field(default_factory=dict)
    read_cost: float = 0.0
    repeat_cost: float | None = None
    parallel: ParallelPlans | None = None
    task_id: str = "sim"


@dataclass(frozen=True)
class LogEvent:
    time: float
    tool: str
    ok: bool


@dataclass(frozen=True)
class SimResult:
    latency_s: float
    ok: bool
    trace: TraceRecord
    value: Any = None
    error: SimulationError | None = None
    log: tuple = ()


def template_key(template: str) -> str:
    return hashlib.sha256(template.encode()).hexdigest()


# -- value synthesis --------------------------------------------------------

def synthesize(schema: ValueSchema | None, path: str = "$"):
    """A deterministic placeholder value shaped like ``schema``."""
    if schema is None:
        return None
    if schema.enum_values:
        return schema.enum_values[0]
    h = zlib.crc32(path.encode())
    if schema.kind == "object":
        return {k: synthesize(v, f"{path}.{k}") for k, v in schema.properties.items()}
    if schema.kind == "array":
        return [synthesize(schema.items, f"{path}[{i}]") for i in range(3)]
    if schema.kind == "string":
        return f"{path.rsplit('.', 1)[-1]}-{h % 1000}"
    if schema.kind == "integer":
        return h % 50
    if schema.kind == "number":
        return (h % 500) / 10
    if schema.kind == "boolean":
        return True
    return None


# -- builtins ---------------------------------------------------------------

def _range(*a):
    return list(range(*[int(x) for x in a]))


_BUILTINS = {
    "format": lambda tmpl, *a, **kw: str(tmpl).format(*a, **kw),
    "len": len,
    "str": lambda x: "null" if x is None else str(x),
    "int": int,
    "float": float,
    "lower": lambda s: str(s).lower(),
    "contains": lambda hay, needle: needle in hay,
    "min": lambda *a: min(a[0]) if len(a) == 1 else min(a),
    "max": lambda *a: max(a[0]) if len(a) == 1 else max(a),
    "sum": lambda xs: sum(xs),
    "range": _range,
    "append": lambda xs, x: list(xs) + [x],
}

_ARITH = {"+": lambda a, b: a + b, "-": lambda a, b: a - b, "*": lambda a, b: a * b,
          "/": lambda a, b: a / b, "%": lambda a, b: a % b,
          "==": lambda a, b: a == b, "!=": lambda a, b: a != b, "<": lambda a, b: a < b,
          "<=": lambda a, b: a <= b, ">": lambda a, b: a > b, ">=": lambda a, b: a >= b}


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class _Run:
    def __init__(self, manifests, env: SimEnv, rng):
        self.manifests = manifests
        self.env = env
        self.rng = rng
        self.state = dict(env.initial_state)
        self.clock = float(env.read_cost)
        self.steps: list[TraceStep] = []
        self.log: list[LogEvent] = []
        self.called: set = set()

    # expressions
    def eval(self, e, scope):
        try:
            return self._eval(e, scope)
        except (TypeError, ValueError, KeyError, IndexError, ZeroDivisionError) as exc:
            raise SimulationError(f"expression failed: {exc}") from None

    def _eval(self, e, scope):
        if isinstance(e, Literal):
            return e.value
        if isinstance(e, Var):
            if e.name not in scope:
                raise SimulationError(f"unbound variable {e.name!r}")
            return scope[e.name]
        if isinstance(e, Attr):
            obj = self._eval(e.obj, scope)
            if not isinstance(obj, Mapping):
                raise SimulationError(f"attribute .{e.name} of non-object {obj!r}")
            return obj.get(e.name)
        if isinstance(e, Index):
            return self._eval(e.obj, scope)[self._eval(e.index, scope)]
        if isinstance(e, Slice):
            obj = self._eval(e.obj, scope)
            lo = self._eval(e.lo, scope) if e.lo is not None else None
            hi = self._eval(e.hi, scope) if e.hi is not None else None
            return obj[lo:hi]
        if isinstance(e, BinOp):
            if e.op == "and":
                return bool(self._eval(e.left, scope)) and bool(self._eval(e.right, scope))
            if e.op == "or":
                return bool(self._eval(e.left, scope)) or bool(self._eval(e.right, scope))
            return _ARITH[e.op](self._eval(e.left, scope), self._eval(e.right, scope))
        if isinstance(e, UnaryOp):
            v = self._eval(e.operand, scope)
            return (not v) if e.op == "not" else -v
        if isinstance(e, ListExpr):
            return [self._eval(i, scope) for i in e.items]
        if isinstance(e, FuncCall):
            args = [self._eval(a, scope) for a in e.args]
            kwargs = {k: self._eval(v, scope) for k, v in e.kwargs}
            return _BUILTINS[e.name](*args, **kwargs)
        raise SimulationError(f"cannot evaluate {e!r}")

    # statements
    def block(self, stmts, scope):
        for s in stmts:
            self.stmt(s, scope)

    def stmt(self, s, scope):
        if isinstance(s, ToolCall):
            result = self.call_tool(s, {k: self.eval(v, scope) for k, v in s.args})
            if s.bind:
                scope[s.bind] = result
        elif isinstance(s, AiEval):
            result = self.call_eval(s, {k: self.eval(v, scope) for k, v in s.args})
            if s.bind:
                scope[s.bind] = result
        elif isinstance(s, Assign):
            scope[s.var] = self.eval(s.expr, scope)
        elif isinstance(s, For):
            items = self.eval(s.iterable, scope)
            if not isinstance(items, (list, tuple, str)):
                raise SimulationError(f"cannot iterate over {items!r}")
            for n, item in enumerate(items):
                if n >= MAX_LOOP_ITERATIONS:
                    raise SimulationError("loop iteration limit reached")
                scope[s.var] = item
                self.block(s.body, scope)
        elif isinstance(s, If):
            self.block(s.then if self.eval(s.cond, scope) else s.orelse, scope)
        elif isinstance(s, Return):
            raise _Return(self.eval(s.expr, scope))

    def call_tool(self, s: ToolCall, args):
        env = self.env
        m: ToolManifest | None = self.manifests.get(s.tool)
        element = env.elements.get(s.tool, s.tool)
        page = self.state.get("page_type", "")
        page = "" if page is None else str(page)
        if m is not None:
            bad = satisfies(self.state, m.pre, {**{p: None for p in m.params}, **args})
            if bad:
                v = bad[0]
                self.steps.append(TraceStep(len(self.steps), element, page, 0.0, False))
                self.log.append(LogEvent(self.clock, s.tool, False))
                raise RuntimePreconditionFailure(s.tool, v.key, v.expected,
                                                 self.state.get(v.key))
        repeat = s.tool in self.called and env.repeat_cost is not None
        if repeat:
            latency = float(env.repeat_cost)
        else:
            try:
                dist = env.tool_latency[s.tool]
            except KeyError:
                raise SimulationError(f"no latency source for tool {s.tool!r}") from None
            latency = float(dist.sample(self.rng))
            self.clock += env.navigations.get(s.tool, 0) * env.read_cost
        self.called.add(s.tool)
        self.clock += latency
        self.steps.append(TraceStep(len(self.steps), element, page, latency, True))
        self.log.append(LogEvent(self.clock, s.tool, True))
        if s.tool in env.tool_returns:
            output = env.tool_returns[s.tool]
        else:
            output = synthesize(m.output_schema if m else None, s.tool)
        if m is not None:
            self.apply_post(m, args, output)
        return output

    def apply_post(self, m: ToolManifest, args, output):
        for key, pat in m.post.items():
            if isinstance(pat, Concrete):
                self.state[key] = pat.value
            elif isinstance(pat, ParamRef):
                if pat.name in args:
                    self.state[key] = args[pat.name]
                elif isinstance(output, Mapping):
                    self.state[key] = output.get(pat.name)
                else:
                    self.state[key] = None
            elif isinstance(pat, OneOf):
                self.state[key] = pat.values[int(self.rng.integers(len(pat.values)))]
            elif isinstance(pat, AnyValue):
                self.state[key] = f"<{m.name}.{key}>"
            elif isinstance(pat, Null):
                self.state[key] = None
            else:  # pragma: no cover
                raise SimulationError(f"unsupported post pattern {render_pattern(pat)}")

    def call_eval(self, s: AiEval, args):
        self.clock += float(self.env.eval_latency.sample(self.rng))
        self.log.append(LogEvent(self.clock, "ai_eval", True))
        answers = self.env.eval_answers
        for key in (template_key(s.template), s.template):
            if key in answers:
                return answers[key]
        try:
            return s.template.format(**args)
        except (KeyError, IndexError, ValueError):
            return s.template


def run_plan(program: PlanProgram, manifests: Mapping[str, ToolManifest], env: SimEnv,
             rng: np.random.Generator) -> SimResult:
    """Execute ``program`` once; a failed precondition ends the run with ``ok=False``."""
    run = _Run(manifests, env, rng)
    value, error = None, None
    try:
        run.block(program.statements, {})
    except _Return as r:
        value = r.value
    except RuntimePreconditionFailure as exc:
        error = exc
    trace = TraceRecord(env.task_id, tuple(run.steps))
    return SimResult(run.clock, error is None, trace, value, error, tuple(run.log))


# -- strategies -------------------------------------------------------------

def applicable(env: SimEnv) -> list[Strategy]:
    out = [Strategy.SERIAL, Strategy.HEDGE]
    if env.parallel is not None:
        out.append(Strategy.PARALLEL)
    return out


def run_strategy(program: PlanProgram, strategy, manifests: Mapping[str, ToolManifest],
                 env: SimEnv, config: SchedulerConfig, rng: np.random.Generator) -> float:
    """Simulated end-to-end latency of one strategy execution."""
    strategy = Strategy(strategy)
    if strategy is Strategy.SERIAL:
        return run_plan(program, manifests, env, rng).latency_s
    if strategy is Strategy.HEDGE:
        return min(run_plan(program, manifests, env, rng).latency_s
                   for _ in range(config.n_workers)) + config.delta_h
    if env.parallel is None:
        raise NotParallelizable("environment declares no parallel split")
    split = env.parallel
    total = run_plan(split.prefix, manifests, env, rng).latency_s if split.prefix else 0.0
    workers = [run_plan(w, manifests, env, rng).latency_s for w in split.workers]
    for batch in _batches(len(workers), config.n_workers):
        total += max(workers[i] for i in batch)
    return total + config.delta_p


@dataclass(frozen=True)
class OracleResult:
    selected: Strategy
    means: Mapping[Strategy, float]

    def to_json(self):
        return {"schema_version": 1, "selected": self.selected.value,
                "means": {s.value: m for s, m in self.means.items()}}


def oracle_strategy(program: PlanProgram, manifests: Mapping[str, ToolManifest], env: SimEnv,
                    config: SchedulerConfig, trials: int, seed: int = 0) -> OracleResult:
    """Run every applicable strategy ``trials`` times on shared seeds; pick the min mean."""
    means = {}
    for s in applicable(env):
        total = math.fsum(
            run_strategy(program, s, manifests, env, config,
                         np.random.default_rng(np.random.SeedSequence([seed, i])))
            for i in range(trials))
        means[s] = total / trials
    best = min(means, key=means.get)
    return OracleResult(best, means)


# -- fixtures ---------------------------------------------------------------

def _tool_name(element: str) -> str:
    name = "".join(c if c.isalnum() else "_" for c in element)
    return name if not name[:1].isdigit() else f"e_{name}"


def _tool_for(entry) -> str:
    # one tool per (element, navigations) so page costs stay per entry
    base = _tool_name(entry.element)
    return f"{base}_nav{entry.navigations}" if entry.navigations else base


def _usage_program(entries) -> PlanProgram:
    stmts = []
    for e in entries:
        stmts.extend(ToolCall(_tool_for(e)) for _ in range(e.count))
    return PlanProgram(tuple(stmts))


def fixture_from_usage(usage: UsagePlan, true_latency: Mapping[str, LatencyDistribution],
                       config: SchedulerConfig, task_id: str = "") -> tuple[PlanProgram, SimEnv]:
    """A contract-free plan and environment that act out a usage prediction.

    Each element becomes a tool; latencies come from ``true_latency`` and the
    page costs mirror the scheduler's accounting.
    """
    entries = [e for e in usage.sequential if e.count]
    all_entries = list(entries)
    par = None
    if usage.parallelizable and usage.parallel is not None:
        split = usage.parallel
        workers = tuple(_usage_program(split.worker_entries(w))
                        for w in range(split.num_workers))
        prefix = _usage_program(split.prefix) if split.prefix else None
        par = ParallelPlans(workers, prefix)
        all_entries += list(split.prefix)
        all_entries += [e for w in range(split.num_workers) for e in split.worker_entries(w)]
    navs, elements, lat = {}, {}, {}
    for e in all_entries:
        t = _tool_for(e)
        navs[t] = e.navigations
        elements[t] = e.element
        lat[t] = true_latency[e.element]
    env = SimEnv(tool_latency=lat, navigations=navs, elements=elements,
                 read_cost=config.c_read, repeat_cost=config.c_repeat, parallel=par,
                 task_id=task_id or usage.task)
    return _usage_program(entries), env


def env_from_json(doc: Mapping, base=".") -> SimEnv:
    """Build an environment from its JSON fixture form.

    Plans inside ``parallel`` may be PlanLang text or paths relative to ``base``.
    """
    def plan_of(ref):
        p = Path(base) / ref
        text = p.read_text() if len(ref) < 256 and "\n" not in ref and p.is_file() else ref
        return load_plan(text)

    tools = doc.get("tools", {})
    par = doc.get("parallel")
    parallel = None
    if par:
        parallel = ParallelPlans(tuple(plan_of(w) for w in par["workers"]),
                                 plan_of(par["prefix"]) if par.get("prefix") else None)
    eval_lat = doc.get("eval_latency")
    return SimEnv(
        initial_state=dict(doc.get("initial_state", {})),
        tool_latency={t: LatencyDistribution.from_json(v["latency"]) for t, v in tools.items()},
        eval_latency=LatencyDistribution.from_json(eval_lat) if eval_lat else Fixed(0.0),
        eval_answers=dict(doc.get("eval_answers", {})),
        tool_returns={t: v["returns"] for t, v in tools.items() if "returns" in v},
        navigations={t: int(v.get("navigations", 0)) for t, v in tools.items()},
        elements={t: v["element"] for t, v in tools.items() if "element" in v},
        read_cost=float(doc.get("read_cost", 0.0)),
        repeat_cost=doc.get("repeat_cost"),
        parallel=parallel,
        task_id=doc.get("task_id", "sim"),
    )


def load_env(path) -> SimEnv:
    path = Path(path)
    return env_from_json(json.loads(path.read_text()), path.parent)

"""Static plan checking against a manifest set.

State flow is an abstract interpretation over the CFG: each block starts
from the join of its predecessors' exit states (back edges included, so
loop bodies are checked against every iteration, not only the first) and
tool calls require ``pre`` before writing ``post``.  Argument types,
uses of tool results and ``pre_tools`` provenance are checked by a walk over
the program in source order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Any, Mapping

from .cfg import EXIT, CallSite, PlanCfg, build_cfg
from .planlang import (AiEval, Assign, Attr, BinOp, For, FuncCall, If, Index, ListExpr,
                       Literal, PlanProgram, Return, Slice, ToolCall, UnaryOp, Var, expr_vars)
from .protocol import (MAYBE_NULL, UNKNOWN, ParamRef, ToolManifest, ValueSchema, apply_post,
                       check_value, encode_state, join_states, kind_accepts, satisfies)

PRECONDITION_UNMET = "PreconditionUnmet"
UNKNOWN_TOOL = "UnknownTool"
ARG_TYPE_ERROR = "ArgTypeError"
RETURN_USE_ERROR = "ReturnUseError"
PROVENANCE_LINT = "ProvenanceLint"
PARSE_ERROR = "ParseError"

SOFT_KINDS = frozenset({PROVENANCE_LINT})


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str
    span: tuple = (0, 0)
    tool: str | None = None
    key: str | None = None
    site: CallSite | None = field(default=None, compare=False, repr=False)

    @property
    def hard(self) -> bool:
        return self.kind not in SOFT_KINDS

    def to_json(self) -> dict:
        return {"kind": self.kind, "tool": self.tool, "line": self.span[0], "col": self.span[1],
                "key": self.key, "detail": self.detail}


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    violations: tuple
    final_state: Mapping[str, Any]

    @property
    def errors(self) -> list[Violation]:
        return [v for v in self.violations if v.hard]

    @property
    def lints(self) -> list[Violation]:
        return [v for v in self.violations if not v.hard]

    def to_json(self) -> dict:
        return {"schema_version": 1, "valid": self.valid,
                "violations": [v.to_json() for v in self.violations],
                "final_state": encode_state(self.final_state)}


def make_report(violations, final_state) -> ValidationReport:
    ordered = tuple(sorted(violations, key=lambda v: (v.span, v.kind, v.detail)))
    return ValidationReport(not any(v.hard for v in ordered), ordered, dict(final_state))


# -- static values and types ------------------------------------------------

def static_value(expr):
    """The compile-time value of an expression, or UNKNOWN."""
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, ListExpr):
        items = [static_value(i) for i in expr.items]
        return UNKNOWN if any(i is UNKNOWN for i in items) else items
    return UNKNOWN


def _referenced_params(manifest: ToolManifest) -> set:
    return {p.name for p in list(manifest.pre.values()) + list(manifest.post.values())
            if isinstance(p, ParamRef)}


def call_args(site: CallSite, manifest: ToolManifest) -> dict:
    """Parameter bindings used for pattern matching at a call site."""
    out_schema = manifest.output_schema
    outputs = set(out_schema.properties)
    # omitted inputs and optional outputs may be null at run time
    args = {p: UNKNOWN if p in outputs and p in out_schema.required else MAYBE_NULL
            for p in set(manifest.params) | _referenced_params(manifest)}
    for name, expr in site.args:
        if name not in outputs or name in manifest.params:
            args[name] = static_value(expr)
    return args


_STRING = ValueSchema("string")
_INTEGER = ValueSchema("integer")
_NUMBER = ValueSchema("number")
_BOOLEAN = ValueSchema("boolean")


def static_type(expr, env: Mapping[str, ValueSchema | None]) -> ValueSchema | None:
    """Best-effort static schema of an expression; None when unknown."""
    if isinstance(expr, Literal):
        v = expr.value
        if isinstance(v, bool):
            return _BOOLEAN
        if isinstance(v, int):
            return _INTEGER
        if isinstance(v, float):
            return _NUMBER
        if isinstance(v, str):
            return _STRING
        return None
    if isinstance(expr, Var):
        return env.get(expr.name)
    if isinstance(expr, Attr):
        t = static_type(expr.obj, env)
        if t is not None and t.kind == "object":
            return t.properties.get(expr.name)
        return None
    if isinstance(expr, Index):
        t = static_type(expr.obj, env)
        if t is not None and t.kind == "array":
            return t.items
        return None
    if isinstance(expr, Slice):
        t = static_type(expr.obj, env)
        return t if t is not None and t.kind in ("array", "string") else None
    if isinstance(expr, BinOp) and expr.op in ("==", "!=", "<", "<=", ">", ">="):
        return _BOOLEAN
    if isinstance(expr, UnaryOp) and expr.op == "not":
        return _BOOLEAN
    if isinstance(expr, FuncCall):
        if expr.name in ("format", "str", "lower"):
            return _STRING
        if expr.name == "len":
            return _INTEGER
        if expr.name == "contains":
            return _BOOLEAN
    return None


def typecheck_call(site: CallSite, manifest: ToolManifest,
                   env: Mapping[str, ValueSchema | None]) -> list[Violation]:
    """Check a call's arguments against the tool's input schema."""
    schema = manifest.input_schema
    given = dict(site.args)
    out = []

    def err(msg, key=None):
        out.append(Violation(ARG_TYPE_ERROR, f"{manifest.name}: {msg}", site.span,
                             manifest.name, key, site))

    for name in given:
        if name not in schema.properties:
            err(f"unexpected argument {name!r}", name)
    for name in schema.required:
        if name not in given:
            err(f"missing required argument {name!r}", name)
    for name, expr in given.items():
        prop = schema.properties.get(name)
        if prop is None:
            continue
        value = static_value(expr)
        if value is not UNKNOWN:
            for tv in check_value(prop, value, name):
                err(str(tv), name)
            continue
        t = static_type(expr, env)
        if t is not None and not kind_accepts(prop.kind, t.kind):
            err(f"{name}: expected {prop.kind}, got {t.kind}", name)
    return out


def _output_type(manifest: ToolManifest | None) -> ValueSchema | None:
    if manifest is None:
        return None
    out = manifest.output_schema
    if out.kind == "object" and not out.properties:
        return None
    return out


def _merge_env(a: dict, b: dict) -> dict:
    return {k: v for k, v in a.items() if k in b and b[k] == v}


def _merge_prov(a: dict, b: dict) -> dict:
    return {k: a.get(k, frozenset()) | b.get(k, frozenset()) for k in set(a) | set(b)}


class _TypeWalker:
    def __init__(self, manifests, sites):
        self.manifests = manifests
        self.sites = iter(sites)
        self.out: list[Violation] = []

    def check_uses(self, expr, env, span):
        if expr is None or isinstance(expr, (Literal, Var)):
            return
        if isinstance(expr, Attr):
            t = static_type(expr.obj, env)
            if t is not None:
                if t.kind == "object" and t.properties and expr.name not in t.properties:
                    known = ", ".join(t.properties)
                    self.out.append(Violation(
                        RETURN_USE_ERROR,
                        f"field {expr.name!r} is not in the result schema (fields: {known})",
                        span, key=expr.name))
                elif t.kind not in ("object",):
                    self.out.append(Violation(
                        RETURN_USE_ERROR, f"field {expr.name!r} accessed on a {t.kind} value",
                        span, key=expr.name))
            self.check_uses(expr.obj, env, span)
            return
        children = []
        if isinstance(expr, Index):
            children = [expr.obj, expr.index]
        elif isinstance(expr, Slice):
            children = [expr.obj, expr.lo, expr.hi]
        elif isinstance(expr, BinOp):
            children = [expr.left, expr.right]
        elif isinstance(expr, UnaryOp):
            children = [expr.operand]
        elif isinstance(expr, ListExpr):
            children = list(expr.items)
        elif isinstance(expr, FuncCall):
            children = list(expr.args) + [v for _, v in expr.kwargs]
        for c in children:
            self.check_uses(c, env, span)

    @staticmethod
    def prov_of(expr, prov) -> frozenset:
        return frozenset().union(*(prov.get(v, frozenset()) for v in expr_vars(expr)))

    def walk(self, stmts, env: dict, prov: dict):
        for s in stmts:
            if isinstance(s, ToolCall):
                site = next(self.sites)
                m = self.manifests.get(s.tool)
                for _, e in s.args:
                    self.check_uses(e, env, s.span)
                if m is not None:
                    self.out.extend(typecheck_call(site, m, env))
                    self.out.extend(self.provenance(site, m, prov))
                if s.bind:
                    env[s.bind] = _output_type(m)
                    prov[s.bind] = frozenset({s.tool})
            elif isinstance(s, AiEval):
                next(self.sites)
                src = frozenset({"ai_eval"})
                for _, e in s.args:
                    self.check_uses(e, env, s.span)
                    src |= self.prov_of(e, prov)
                if s.bind:
                    env[s.bind] = _STRING
                    prov[s.bind] = src
            elif isinstance(s, Assign):
                self.check_uses(s.expr, env, s.span)
                env[s.var] = static_type(s.expr, env)
                prov[s.var] = self.prov_of(s.expr, prov)
            elif isinstance(s, Return):
                self.check_uses(s.expr, env, s.span)
            elif isinstance(s, For):
                self.check_uses(s.iterable, env, s.span)
                it = static_type(s.iterable, env)
                env2, prov2 = dict(env), dict(prov)
                env2[s.var] = it.items if it is not None and it.kind == "array" else None
                prov2[s.var] = self.prov_of(s.iterable, prov)
                self.walk(s.body, env2, prov2)
                merged = _merge_env(env, env2)
                env.clear()
                env.update(merged)
                prov.update({k: v for k, v in _merge_prov(prov, prov2).items() if k != s.var})
            elif isinstance(s, If):
                self.check_uses(s.cond, env, s.span)
                e1, p1 = dict(env), dict(prov)
                e2, p2 = dict(env), dict(prov)
                self.walk(s.then, e1, p1)
                self.walk(s.orelse, e2, p2)
                env.clear()
                env.update(_merge_env(e1, e2))
                prov.clear()
                prov.update(_merge_prov(p1, p2))

    def provenance(self, site, manifest, prov) -> list[Violation]:
        out = []
        for name, expr in site.args:
            sources = manifest.pre_tools.get(name)
            if not sources:
                continue
            if not self.prov_of(expr, prov) & set(sources):
                out.append(Violation(
                    PROVENANCE_LINT,
                    f"{manifest.name}: argument {name!r} does not flow from "
                    f"{' or '.join(sources)}", site.span, manifest.name, name, site))
        return out


# -- state flow -------------------------------------------------------------

def _transfer(block, state, manifests, sink=None):
    for site in block.calls:
        if site.kind != "tool":
            continue
        m = manifests.get(site.tool_name)
        if m is None:
            if sink is not None:
                sink.append(Violation(UNKNOWN_TOOL, f"no manifest for tool {site.tool_name!r}",
                                      site.span, site.tool_name, None, site))
            continue
        args = call_args(site, m)
        if sink is not None:
            for sv in satisfies(state, m.pre, args):
                sink.append(Violation(PRECONDITION_UNMET, f"{m.name}: {sv.describe()}",
                                      site.span, m.name, sv.key, site))
        state = apply_post(state, m.post, args)
    return state


def validate(cfg: PlanCfg | PlanProgram, manifests: Mapping[str, ToolManifest],
             initial_state: Mapping[str, Any] | None = None) -> ValidationReport:
    """Check state flow, argument types and result uses of a plan."""
    if isinstance(cfg, PlanProgram):
        cfg = build_cfg(cfg)
    initial = dict(initial_state or {})
    preds = {b.id: cfg.preds(b.id) for b in cfg.blocks}

    entry_states: dict[int, dict] = {}
    exit_states: dict[int, dict] = {}
    limit = 64 * (len(cfg.blocks) + 1)
    for _ in range(limit):
        changed = False
        for blk in cfg.blocks:
            if blk.id == cfg.entry:
                state = initial
            else:
                ins = [exit_states[p] for p in preds[blk.id] if p in exit_states]
                if not ins:
                    continue
                state = reduce(join_states, ins)
            out = _transfer(blk, state, manifests)
            entry_states[blk.id] = state
            if exit_states.get(blk.id) != out:
                exit_states[blk.id] = out
                changed = True
        if not changed:
            break
    else:  # pragma: no cover - the lattice has finite height
        raise RuntimeError("state-flow analysis did not converge")

    # Report against the first-entry state (forward edges only) so messages
    # name the concrete value seen; the fixpoint state adds re-entry failures.
    violations: list[Violation] = []
    fwd_exit: dict[int, dict] = {}
    for blk in cfg.blocks:
        if blk.id == cfg.entry:
            state = initial
        else:
            ins = [fwd_exit[p] for p in preds[blk.id]
                   if p in fwd_exit and not cfg.is_back_edge(p, blk.id)]
            if not ins:
                continue
            state = reduce(join_states, ins)
        fwd_exit[blk.id] = _transfer(blk, state, manifests, violations)
    seen = {(v.span, v.kind, v.key) for v in violations}
    for blk in cfg.blocks:
        if blk.id in entry_states:
            extra: list[Violation] = []
            _transfer(blk, entry_states[blk.id], manifests, extra)
            violations.extend(v for v in extra if (v.span, v.kind, v.key) not in seen)

    walker = _TypeWalker(manifests, cfg.call_sites())
    walker.walk(cfg.program.statements, {}, {})
    violations.extend(walker.out)

    finals = [exit_states[p] for p in cfg.preds(EXIT) if p in exit_states]
    final_state = reduce(join_states, finals) if finals else initial
    return make_report(violations, final_state)

"""PlanLang: the small statement language candidate plans are written in.

Grammar::

    program := stmt*
    stmt    := [IDENT "="] ("call" IDENT "(" args ")" | "eval" STRING "(" args ")")
             | IDENT "=" expr | IDENT "+=" expr
             | "for" IDENT "in" expr "{" stmt* "}"
             | "if" expr "{" stmt* "}" ["else" ("{" stmt* "}" | if-stmt)]
             | "return" expr
    args    := [IDENT "=" expr ("," IDENT "=" expr)*]

Expressions are pure: literals (strings, numbers, ``true``/``false``/``null``),
variables, ``a.b``, ``a[i]``, ``a[i:j]``, list literals, arithmetic,
comparisons, ``and``/``or``/``not`` and calls to pure builtins such as
``format("{n} items", n=n)`` or ``len(xs)``.  Newlines are not significant;
``;`` may separate statements and ``#`` starts a comment.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping

from .errors import ParseError, PlanSchemaError

BUILTINS = frozenset({"format", "len", "str", "int", "float", "lower", "contains",
                      "min", "max", "sum", "range", "append"})

Span = tuple  # (line, col)


# -- expressions ------------------------------------------------------------

@dataclass(frozen=True)
class Literal:
    value: Any


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Attr:
    obj: "Expr"
    name: str


@dataclass(frozen=True)
class Index:
    obj: "Expr"
    index: "Expr"


@dataclass(frozen=True)
class Slice:
    obj: "Expr"
    lo: "Expr | None"
    hi: "Expr | None"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class UnaryOp:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class ListExpr:
    items: tuple


@dataclass(frozen=True)
class FuncCall:
    name: str
    args: tuple = ()
    kwargs: tuple = ()   # ((name, Expr), ...)


Expr = Literal | Var | Attr | Index | Slice | BinOp | UnaryOp | ListExpr | FuncCall

COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")
ARITH_OPS = ("+", "-", "*", "/", "%")
BOOL_OPS = ("and", "or")


# -- statements -------------------------------------------------------------

@dataclass(frozen=True)
class ToolCall:
    tool: str
    args: tuple = ()          # ((param, Expr), ...)
    bind: str | None = None
    span: Span = field(default=(0, 0), compare=False)

    @property
    def arg_map(self) -> dict:
        return dict(self.args)


@dataclass(frozen=True)
class AiEval:
    template: str
    args: tuple = ()
    bind: str | None = None
    span: Span = field(default=(0, 0), compare=False)

    @property
    def arg_map(self) -> dict:
        return dict(self.args)


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Expr
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class For:
    var: str
    iterable: Expr
    body: tuple
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple
    orelse: tuple = ()
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Return:
    expr: Expr
    span: Span = field(default=(0, 0), compare=False)


Stmt = ToolCall | AiEval | Assign | For | If | Return


@dataclass(frozen=True)
class PlanProgram:
    statements: tuple = ()

    def walk(self) -> Iterator[Stmt]:
        return walk_statements(self.statements)

    def calls(self) -> list:
        return [s for s in self.walk() if isinstance(s, (ToolCall, AiEval))]


def walk_statements(stmts) -> Iterator[Stmt]:
    for s in stmts:
        yield s
        if isinstance(s, For):
            yield from walk_statements(s.body)
        elif isinstance(s, If):
            yield from walk_statements(s.then)
            yield from walk_statements(s.orelse)


def expr_vars(expr) -> set:
    """Variable names read by an expression."""
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, Literal) or expr is None:
        return set()
    if isinstance(expr, Attr):
        return expr_vars(expr.obj)
    if isinstance(expr, Index):
        return expr_vars(expr.obj) | expr_vars(expr.index)
    if isinstance(expr, Slice):
        return expr_vars(expr.obj) | expr_vars(expr.lo) | expr_vars(expr.hi)
    if isinstance(expr, BinOp):
        return expr_vars(expr.left) | expr_vars(expr.right)
    if isinstance(expr, UnaryOp):
        return expr_vars(expr.operand)
    if isinstance(expr, ListExpr):
        return set().union(*map(expr_vars, expr.items)) if expr.items else set()
    if isinstance(expr, FuncCall):
        out = set()
        for a in expr.args:
            out |= expr_vars(a)
        for _, a in expr.kwargs:
            out |= expr_vars(a)
        return out
    raise TypeError(f"not an expression: {expr!r}")


# -- lexer ------------------------------------------------------------------

KEYWORDS = frozenset({"call", "eval", "for", "in", "if", "else", "return",
                      "and", "or", "not", "true", "false", "null"})

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<string>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|\+=|[-+*/%<>=(){}\[\],.:;])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str       # number, string, ident, kw, op, eof
    text: str
    value: Any
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "number":
            is_float = any(c in tok for c in ".eE")
            tokens.append(Token("number", tok, float(tok) if is_float else int(tok), line, col))
        elif kind == "string":
            tokens.append(Token("string", tok, _unquote(tok, line, col), line, col))
        elif kind == "ident":
            tokens.append(Token("kw" if tok in KEYWORDS else "ident", tok, tok, line, col))
        elif kind == "op":
            tokens.append(Token("op", tok, tok, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", None, line, pos - line_start + 1))
    return tokens


def _unquote(tok, line, col):
    if tok[0] == "'":
        tok = '"' + tok[1:-1].replace("\\'", "'").replace('"', '\\"') + '"'
    try:
        return json.loads(tok)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad string literal: {exc.msg}", line, col) from None


# -- parser -----------------------------------------------------------------

class _Parser:
    def __init__(self, text):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, offset=1) -> Token:
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def at(self, text, kind=None) -> bool:
        t = self.tok
        return t.text == text and t.kind in ((kind,) if kind else ("op", "kw"))

    def fail(self, message, expected=()):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"{message}, found {found}", t.line, t.col, expected)

    def expect(self, text) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}", [text])
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        if self.tok.kind != "ident":
            self.fail("expected identifier", ["IDENT"])
        name = self.tok.text
        self.i += 1
        return name

    # statements

    def program(self) -> PlanProgram:
        stmts = self.block_body(top=True)
        if self.tok.kind != "eof":
            self.fail("expected statement", ["call", "eval", "for", "if", "return", "IDENT"])
        return PlanProgram(tuple(stmts))

    def block_body(self, top=False) -> list:
        stmts = []
        while True:
            while self.at(";"):
                self.i += 1
            if self.tok.kind == "eof" or self.at("}"):
                return stmts
            stmts.append(self.statement())

    def braced(self) -> tuple:
        self.expect("{")
        body = self.block_body()
        self.expect("}")
        return tuple(body)

    def statement(self) -> Stmt:
        t = self.tok
        span = (t.line, t.col)
        if self.at("call") or self.at("eval"):
            return self.call_stmt(None, span)
        if self.at("for"):
            self.i += 1
            var = self.ident()
            self.expect("in")
            it = self.expr()
            return For(var, it, self.braced(), span)
        if self.at("if"):
            return self.if_stmt()
        if self.at("return"):
            self.i += 1
            return Return(self.expr(), span)
        if t.kind == "ident":
            nxt = self.peek()
            if nxt.text == "=" and nxt.kind == "op":
                self.i += 2
                if self.at("call") or self.at("eval"):
                    return self.call_stmt(t.text, span)
                return Assign(t.text, self.expr(), span)
            if nxt.text == "+=":
                self.i += 2
                return Assign(t.text, BinOp("+", Var(t.text), self.expr()), span)
            self.i += 1
            self.fail("expected '=' or '+=' after identifier", ["=", "+="])
        self.fail("expected statement", ["call", "eval", "for", "if", "return", "IDENT"])

    def if_stmt(self) -> If:
        t = self.expect("if")
        cond = self.expr()
        then = self.braced()
        orelse: tuple = ()
        if self.at("else"):
            self.i += 1
            orelse = (self.if_stmt(),) if self.at("if") else self.braced()
        return If(cond, then, orelse, (t.line, t.col))

    def call_stmt(self, bind, span) -> Stmt:
        if self.at("call"):
            self.i += 1
            tool = self.ident()
            return ToolCall(tool, self.named_args(), bind, span)
        self.expect("eval")
        if self.tok.kind != "string":
            self.fail("expected template string after 'eval'", ["STRING"])
        template = self.tok.value
        self.i += 1
        return AiEval(template, self.named_args(), bind, span)

    def named_args(self) -> tuple:
        self.expect("(")
        args = []
        seen = set()
        while not self.at(")"):
            t = self.tok
            name = self.ident()
            if name in seen:
                raise ParseError(f"duplicate argument {name!r}", t.line, t.col)
            seen.add(name)
            self.expect("=")
            args.append((name, self.expr()))
            if not self.at(","):
                break
            self.i += 1
        self.expect(")")
        return tuple(args)

    # expressions

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self):
        left = self.and_expr()
        while self.at("or"):
            self.i += 1
            left = BinOp("or", left, self.and_expr())
        return left

    def and_expr(self):
        left = self.not_expr()
        while self.at("and"):
            self.i += 1
            left = BinOp("and", left, self.not_expr())
        return left

    def not_expr(self):
        if self.at("not"):
            self.i += 1
            return UnaryOp("not", self.not_expr())
        return self.comparison()

    def comparison(self):
        left = self.additive()
        while self.tok.kind == "op" and self.tok.text in COMPARE_OPS:
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.additive())
        return left

    def additive(self):
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/", "%"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.at("-"):
            self.i += 1
            if self.tok.kind == "number":
                value = -self.tok.value
                self.i += 1
                return self.postfix(Literal(value))
            return UnaryOp("-", self.unary())
        return self.postfix(self.primary())

    def postfix(self, e):
        while True:
            if self.at("."):
                self.i += 1
                e = Attr(e, self.ident())
            elif self.at("["):
                self.i += 1
                lo = None if self.at(":") else self.expr()
                if self.at(":"):
                    self.i += 1
                    hi = None if self.at("]") else self.expr()
                    e = Slice(e, lo, hi)
                else:
                    e = Index(e, lo)
                self.expect("]")
            else:
                return e

    def primary(self):
        t = self.tok
        if t.kind in ("number", "string"):
            self.i += 1
            return Literal(t.value)
        if t.kind == "kw" and t.text in ("true", "false", "null"):
            self.i += 1
            return Literal({"true": True, "false": False, "null": None}[t.text])
        if t.kind == "ident":
            self.i += 1
            if self.at("("):
                if t.text not in BUILTINS:
                    raise ParseError(f"unknown builtin {t.text!r}; tool calls need 'call'",
                                     t.line, t.col)
                return self.func_args(t.text)
            return Var(t.text)
        if self.at("("):
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        if self.at("["):
            self.i += 1
            items = []
            while not self.at("]"):
                items.append(self.expr())
                if not self.at(","):
                    break
                self.i += 1
            self.expect("]")
            return ListExpr(tuple(items))
        self.fail("expected expression", ["IDENT", "NUMBER", "STRING", "(", "["])

    def func_args(self, name) -> FuncCall:
        self.expect("(")
        args, kwargs = [], []
        while not self.at(")"):
            if self.tok.kind == "ident" and self.peek().text == "=" and self.peek().kind == "op":
                key = self.ident()
                self.i += 1
                kwargs.append((key, self.expr()))
            else:
                if kwargs:
                    self.fail("positional argument after keyword argument")
                args.append(self.expr())
            if not self.at(","):
                break
            self.i += 1
        self.expect(")")
        return FuncCall(name, tuple(args), tuple(kwargs))


def parse_plan(text: str) -> PlanProgram:
    """Parse PlanLang source; raises :class:`ParseError` with a location."""
    program = _Parser(text).program()
    check_program(program)
    return program


def parse_expr(text: str) -> Expr:
    p = _Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        p.fail("unexpected trailing input")
    return e


def check_program(program: PlanProgram):
    """Enforce the return-position and binding-before-use rules."""
    stmts = program.statements
    for i, s in enumerate(stmts):
        if isinstance(s, Return) and i != len(stmts) - 1:
            raise ParseError("'return' must be the last statement", *s.span)
    for s in program.walk():
        if isinstance(s, Return) and not any(s is t for t in stmts):
            raise ParseError("'return' is only allowed at the top level", *s.span)
    _check_bound(stmts, frozenset())


def _check_bound(stmts, bound: frozenset) -> frozenset:
    def need(expr, span):
        missing = sorted(expr_vars(expr) - bound)
        if missing:
            raise ParseError(f"variable {missing[0]!r} may be used before assignment", *span)

    for s in stmts:
        if isinstance(s, (ToolCall, AiEval)):
            for _, e in s.args:
                need(e, s.span)
            if s.bind:
                bound = bound | {s.bind}
        elif isinstance(s, Assign):
            need(s.expr, s.span)
            bound = bound | {s.var}
        elif isinstance(s, Return):
            need(s.expr, s.span)
        elif isinstance(s, For):
            need(s.iterable, s.span)
            _check_bound(s.body, bound | {s.var})
        elif isinstance(s, If):
            need(s.cond, s.span)
            a = _check_bound(s.then, bound)
            b = _check_bound(s.orelse, bound)
            bound = a & b
    return bound


# -- rendering --------------------------------------------------------------

def render_expr(e) -> str:
    if isinstance(e, Literal):
        v = e.value
        if v is None:
            return "null"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return json.dumps(v)
        return repr(v)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Attr):
        return f"{_render_base(e.obj)}.{e.name}"
    if isinstance(e, Index):
        return f"{_render_base(e.obj)}[{render_expr(e.index)}]"
    if isinstance(e, Slice):
        lo = "" if e.lo is None else render_expr(e.lo)
        hi = "" if e.hi is None else render_expr(e.hi)
        return f"{_render_base(e.obj)}[{lo}:{hi}]"
    if isinstance(e, BinOp):
        return f"({render_expr(e.left)} {e.op} {render_expr(e.right)})"
    if isinstance(e, UnaryOp):
        inner = render_expr(e.operand)
        return f"(not ({inner}))" if e.op == "not" else f"(-({inner}))"
    if isinstance(e, ListExpr):
        return "[" + ", ".join(render_expr(i) for i in e.items) + "]"
    if isinstance(e, FuncCall):
        parts = [render_expr(a) for a in e.args] + [f"{k}={render_expr(v)}" for k, v in e.kwargs]
        return f"{e.name}({', '.join(parts)})"
    raise TypeError(f"not an expression: {e!r}")


def _render_base(e) -> str:
    # a bare number could swallow the '.' of an attribute access
    text = render_expr(e)
    numeric = isinstance(e, Literal) and isinstance(e.value, (int, float)) \
        and not isinstance(e.value, bool)
    return f"({text})" if numeric else text


def _render_args(args) -> str:
    return ", ".join(f"{k}={render_expr(v)}" for k, v in args)


def render_plan(program: PlanProgram, indent="  ") -> str:
    lines: list[str] = []

    def emit(stmts, depth):
        pad = indent * depth
        for s in stmts:
            if isinstance(s, (ToolCall, AiEval)):
                head = f"{s.bind} = " if s.bind else ""
                if isinstance(s, ToolCall):
                    lines.append(f"{pad}{head}call {s.tool}({_render_args(s.args)})")
                else:
                    lines.append(f"{pad}{head}eval {json.dumps(s.template)}"
                                 f"({_render_args(s.args)})")
            elif isinstance(s, Assign):
                lines.append(f"{pad}{s.var} = {render_expr(s.expr)}")
            elif isinstance(s, Return):
                lines.append(f"{pad}return {render_expr(s.expr)}")
            elif isinstance(s, For):
                lines.append(f"{pad}for {s.var} in {render_expr(s.iterable)} {{")
                emit(s.body, depth + 1)
                lines.append(f"{pad}}}")
            elif isinstance(s, If):
                lines.append(f"{pad}if {render_expr(s.cond)} {{")
                emit(s.then, depth + 1)
                if s.orelse:
                    lines.append(f"{pad}}} else {{")
                    emit(s.orelse, depth + 1)
                lines.append(f"{pad}}}")

    emit(program.statements, 0)
    return "\n".join(lines) + ("\n" if lines else "")


# -- canonical JSON IR ------------------------------------------------------

def expr_to_json(e) -> dict:
    if isinstance(e, Literal):
        return {"kind": "lit", "value": e.value}
    if isinstance(e, Var):
        return {"kind": "var", "name": e.name}
    if isinstance(e, Attr):
        return {"kind": "attr", "obj": expr_to_json(e.obj), "name": e.name}
    if isinstance(e, Index):
        return {"kind": "index", "obj": expr_to_json(e.obj), "index": expr_to_json(e.index)}
    if isinstance(e, Slice):
        return {"kind": "slice", "obj": expr_to_json(e.obj),
                "lo": None if e.lo is None else expr_to_json(e.lo),
                "hi": None if e.hi is None else expr_to_json(e.hi)}
    if isinstance(e, BinOp):
        return {"kind": "binop", "op": e.op, "left": expr_to_json(e.left),
                "right": expr_to_json(e.right)}
    if isinstance(e, UnaryOp):
        return {"kind": "unop", "op": e.op, "operand": expr_to_json(e.operand)}
    if isinstance(e, ListExpr):
        return {"kind": "list", "items": [expr_to_json(i) for i in e.items]}
    if isinstance(e, FuncCall):
        return {"kind": "func", "name": e.name, "args": [expr_to_json(a) for a in e.args],
                "kwargs": {k: expr_to_json(v) for k, v in e.kwargs}}
    raise TypeError(f"not an expression: {e!r}")


def plan_to_json(program: PlanProgram) -> dict:
    def stmt(s):
        if isinstance(s, ToolCall):
            return {"kind": "tool_call", "tool": s.tool,
                    "args": {k: expr_to_json(v) for k, v in s.args}, "bind": s.bind}
        if isinstance(s, AiEval):
            return {"kind": "ai_eval", "template": s.template,
                    "args": {k: expr_to_json(v) for k, v in s.args}, "bind": s.bind}
        if isinstance(s, Assign):
            return {"kind": "assign", "var": s.var, "expr": expr_to_json(s.expr)}
        if isinstance(s, For):
            return {"kind": "for", "var": s.var, "iter": expr_to_json(s.iterable),
                    "body": [stmt(b) for b in s.body]}
        if isinstance(s, If):
            return {"kind": "if", "cond": expr_to_json(s.cond),
                    "then": [stmt(b) for b in s.then], "else": [stmt(b) for b in s.orelse]}
        return {"kind": "return", "expr": expr_to_json(s.expr)}

    return {"stmts": [stmt(s) for s in program.statements]}


def _req(doc, key, path, types=None):
    if not isinstance(doc, Mapping) or key not in doc:
        raise PlanSchemaError(path, f"missing field {key!r}")
    v = doc[key]
    if types is not None and not isinstance(v, types):
        raise PlanSchemaError(f"{path}.{key}", f"expected {getattr(types, '__name__', types)}")
    return v


def expr_from_json(doc, path="$") -> Expr:
    if isinstance(doc, str):
        try:
            return parse_expr(doc)
        except ParseError as exc:
            raise PlanSchemaError(path, f"bad expression text: {exc}") from None
    if not isinstance(doc, Mapping):
        raise PlanSchemaError(path, "expression must be an object or expression text")
    kind = _req(doc, "kind", path, str)
    sub = lambda key: expr_from_json(_req(doc, key, path), f"{path}.{key}")  # noqa: E731
    if kind == "lit":
        v = _req(doc, "value", path)
        if not (v is None or isinstance(v, (str, int, float, bool))):
            raise PlanSchemaError(f"{path}.value", "literal must be a scalar")
        return Literal(v)
    if kind == "var":
        return Var(_req(doc, "name", path, str))
    if kind == "attr":
        return Attr(sub("obj"), _req(doc, "name", path, str))
    if kind == "index":
        return Index(sub("obj"), sub("index"))
    if kind == "slice":
        lo, hi = doc.get("lo"), doc.get("hi")
        return Slice(sub("obj"), None if lo is None else expr_from_json(lo, f"{path}.lo"),
                     None if hi is None else expr_from_json(hi, f"{path}.hi"))
    if kind == "binop":
        op = _req(doc, "op", path, str)
        if op not in COMPARE_OPS + ARITH_OPS + BOOL_OPS:
            raise PlanSchemaError(f"{path}.op", f"unknown operator {op!r}")
        return BinOp(op, sub("left"), sub("right"))
    if kind == "unop":
        op = _req(doc, "op", path, str)
        if op not in ("-", "not"):
            raise PlanSchemaError(f"{path}.op", f"unknown operator {op!r}")
        return UnaryOp(op, sub("operand"))
    if kind == "list":
        items = _req(doc, "items", path, list)
        return ListExpr(tuple(expr_from_json(x, f"{path}.items[{i}]")
                              for i, x in enumerate(items)))
    if kind == "func":
        name = _req(doc, "name", path, str)
        if name not in BUILTINS:
            raise PlanSchemaError(f"{path}.name", f"unknown builtin {name!r}")
        args = doc.get("args", [])
        kwargs = doc.get("kwargs", {})
        return FuncCall(name,
                        tuple(expr_from_json(a, f"{path}.args[{i}]") for i, a in enumerate(args)),
                        tuple((k, expr_from_json(v, f"{path}.kwargs.{k}"))
                              for k, v in kwargs.items()))
    raise PlanSchemaError(f"{path}.kind", f"unknown expression kind {kind!r}")


def load_plan_json(doc) -> PlanProgram:
    """Build a program from the canonical JSON IR (``{"stmts": [...]}``)."""

    def span(d):
        return (d.get("line", 0), d.get("col", 0))

    def args(d, path):
        raw = d.get("args", {})
        if not isinstance(raw, Mapping):
            raise PlanSchemaError(f"{path}.args", "expected an object of name -> expression")
        return tuple((k, expr_from_json(v, f"{path}.args.{k}")) for k, v in raw.items())

    def stmts(items, path):
        if not isinstance(items, list):
            raise PlanSchemaError(path, "expected a list of statements")
        return tuple(stmt(d, f"{path}[{i}]") for i, d in enumerate(items))

    def stmt(d, path):
        kind = _req(d, "kind", path, str)
        bind = d.get("bind")
        if bind is not None and not isinstance(bind, str):
            raise PlanSchemaError(f"{path}.bind", "expected a variable name or null")
        if kind == "tool_call":
            return ToolCall(_req(d, "tool", path, str), args(d, path), bind, span(d))
        if kind == "ai_eval":
            return AiEval(_req(d, "template", path, str), args(d, path), bind, span(d))
        if kind == "assign":
            return Assign(_req(d, "var", path, str),
                          expr_from_json(_req(d, "expr", path), f"{path}.expr"), span(d))
        if kind == "for":
            return For(_req(d, "var", path, str),
                       expr_from_json(_req(d, "iter", path), f"{path}.iter"),
                       stmts(_req(d, "body", path), f"{path}.body"), span(d))
        if kind == "if":
            return If(expr_from_json(_req(d, "cond", path), f"{path}.cond"),
                      stmts(d.get("then", []), f"{path}.then"),
                      stmts(d.get("else", []), f"{path}.else"), span(d))
        if kind == "return":
            return Return(expr_from_json(_req(d, "expr", path), f"{path}.expr"), span(d))
        raise PlanSchemaError(f"{path}.kind", f"unknown statement kind {kind!r}")

    program = PlanProgram(stmts(_req(doc, "stmts", "$", list), "$.stmts"))
    try:
        check_program(program)
    except ParseError as exc:
        raise PlanSchemaError("$", exc.message) from None
    return program


def load_plan(text_or_path) -> PlanProgram:
    """Load a plan from PlanLang text or a JSON IR document (by content sniffing)."""
    if isinstance(text_or_path, os.PathLike):
        text = Path(text_or_path).read_text()
    else:
        text = str(text_or_path)
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return load_plan_json(json.loads(text))
    return parse_plan(text)

"""Control-flow graph over the call sites of a plan.

Only tool calls and ``eval`` calls occupy blocks; pure statements leave no
trace.  Blocks are numbered in program order, so every forward edge goes
from a lower to a higher id and every back edge (loop re-entry) goes from a
higher or equal id to a lower one.  ``EXIT`` is a virtual sink.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .planlang import AiEval, For, If, PlanProgram, ToolCall, walk_statements

EXIT = -1


@dataclass(frozen=True)
class CallSite:
    kind: str                   # "tool" or "ai_eval"
    tool_name: str | None
    args: tuple
    depth: int
    span: tuple
    block: int
    bind: str | None = None
    template: str | None = None

    @property
    def label(self) -> str:
        return self.tool_name if self.kind == "tool" else "ai_eval"


@dataclass(frozen=True)
class BasicBlock:
    id: int
    depth: int
    calls: tuple = ()
    branch_tag: str | None = None


@dataclass(frozen=True)
class LoopInfo:
    body_entry: int
    blocks: tuple
    depth: int
    span: tuple


@dataclass(frozen=True)
class PlanCfg:
    blocks: tuple
    edges: tuple
    entry: int
    program: PlanProgram = field(compare=False, repr=False)
    loops: tuple = ()
    exit: int = EXIT

    def preds(self, block_id) -> list[int]:
        return [s for s, d in self.edges if d == block_id]

    def succs(self, block_id) -> list[int]:
        return [d for s, d in self.edges if s == block_id]

    def call_sites(self) -> list[CallSite]:
        return [c for b in self.blocks for c in b.calls]

    def is_back_edge(self, src, dst) -> bool:
        return dst != EXIT and src >= dst


def _has_calls(stmts) -> bool:
    return any(isinstance(s, (ToolCall, AiEval)) for s in walk_statements(stmts))


class _Builder:
    def __init__(self):
        self.blocks: list[dict] = []
        self.edges: list[tuple] = []
        self.loops: list[LoopInfo] = []

    def new_block(self, depth, tag):
        self.blocks.append({"depth": depth, "tag": tag, "calls": []})
        return len(self.blocks) - 1

    def link(self, srcs, dst):
        for s in srcs:
            if (s, dst) not in self.edges:
                self.edges.append((s, dst))

    @staticmethod
    def close(open_block, frontier):
        return [open_block] if open_block is not None else list(frontier)

    def seq(self, stmts, open_block, frontier, depth, tag):
        for s in stmts:
            if isinstance(s, (ToolCall, AiEval)):
                if open_block is None:
                    open_block = self.new_block(depth, tag)
                    self.link(frontier, open_block)
                    frontier = []
                blk = self.blocks[open_block]
                if isinstance(s, ToolCall):
                    site = CallSite("tool", s.tool, s.args, depth, s.span, open_block, s.bind)
                else:
                    site = CallSite("ai_eval", None, s.args, depth, s.span, open_block, s.bind,
                                    s.template)
                blk["calls"].append(site)
            elif isinstance(s, For) and _has_calls(s.body):
                preds = self.close(open_block, frontier)
                entry = self.new_block(depth + 1, tag)
                self.link(preds, entry)
                ob, fr = self.seq(s.body, entry, [], depth + 1, tag)
                exits = self.close(ob, fr)
                self.link(exits, entry)
                self.loops.append(LoopInfo(entry, tuple(range(entry, len(self.blocks))),
                                           depth + 1, s.span))
                open_block, frontier = None, list(dict.fromkeys(preds + exits))
            elif isinstance(s, If) and _has_calls((s,)):
                preds = self.close(open_block, frontier)
                exits = []
                for name, branch in (("then", s.then), ("else", s.orelse)):
                    if not _has_calls(branch):
                        exits.extend(preds)
                        continue
                    btag = f"{tag + '/' if tag else ''}if@{s.span[0]}:{s.span[1]}:{name}"
                    b = self.new_block(depth, btag)
                    self.link(preds, b)
                    ob, fr = self.seq(branch, b, [], depth, btag)
                    exits.extend(self.close(ob, fr))
                open_block, frontier = None, list(dict.fromkeys(exits))
        return open_block, frontier


def build_cfg(program: PlanProgram) -> PlanCfg:
    b = _Builder()
    entry = b.new_block(0, None)
    ob, fr = b.seq(program.statements, entry, [], 0, None)
    b.link(b.close(ob, fr), EXIT)
    blocks = tuple(BasicBlock(i, d["depth"], tuple(d["calls"]), d["tag"])
                   for i, d in enumerate(b.blocks))
    return PlanCfg(blocks, tuple(b.edges), entry, program, tuple(b.loops))

from hypothesis import given, settings

from agentjit.cfg import EXIT, build_cfg
from agentjit.planlang import AiEval, For, If, ToolCall, parse_plan

from test_planlang import programs


def test_straight_line():
    cfg = build_cfg(parse_plan("call a()\ncall b()\ncall c()"))
    assert len(cfg.blocks) == 1
    assert cfg.blocks[0].depth == 0
    assert [c.tool_name for c in cfg.call_sites()] == ["a", "b", "c"]
    assert cfg.edges == ((0, EXIT),)


def test_single_loop():
    cfg = build_cfg(parse_plan("xs = [1, 2]\nfor x in xs { call get_store_details() }"))
    assert [b.depth for b in cfg.blocks] == [0, 1]
    (site,) = cfg.call_sites()
    assert site.depth == 1 and site.block == 1
    assert (1, 1) in cfg.edges            # back edge
    assert cfg.is_back_edge(1, 1)
    assert len(cfg.loops) == 1 and cfg.loops[0].body_entry == 1


def test_nested_eval_depth():
    src = 'xs = [1]\nfor a in xs {\n  for b in xs {\n    r = eval "t"()\n  }\n}'
    cfg = build_cfg(parse_plan(src))
    (site,) = cfg.call_sites()
    assert site.kind == "ai_eval" and site.depth == 2
    assert max(b.depth for b in cfg.blocks) == 2


def test_pure_loop_adds_no_blocks(plans):
    cfg = build_cfg(plans["c"])
    assert len(cfg.blocks) == 1
    assert [c.tool_name for c in cfg.call_sites()] == ["goto_home", "list_all_stores"]


def test_branch_arms_get_tags():
    cfg = build_cfg(parse_plan(
        "f = 1\ncall a()\nif f < 2 { call b() } else { call c() }\ncall d()"))
    tags = [b.branch_tag for b in cfg.blocks]
    assert tags[0] is None
    assert any(t and t.endswith(":then") for t in tags)
    assert any(t and t.endswith(":else") for t in tags)
    # both arms flow into the block holding d
    d_block = next(c.block for c in cfg.call_sites() if c.tool_name == "d")
    assert len(cfg.preds(d_block)) == 2


def test_missing_else_falls_through():
    cfg = build_cfg(parse_plan("f = 1\ncall a()\nif f < 2 { call b() }\ncall d()"))
    d_block = next(c.block for c in cfg.call_sites() if c.tool_name == "d")
    assert sorted(cfg.preds(d_block)) == [0, 1]


def test_empty_program():
    cfg = build_cfg(parse_plan(""))
    assert cfg.call_sites() == []
    assert cfg.succs(cfg.entry) == [EXIT]


def _depth_oracle(stmts, depth=0):
    """Independent recursive walk: (tool-or-eval label, depth) in program order."""
    out = []
    for s in stmts:
        if isinstance(s, ToolCall):
            out.append((s.tool, depth))
        elif isinstance(s, AiEval):
            out.append(("ai_eval", depth))
        elif isinstance(s, For):
            out.extend(_depth_oracle(s.body, depth + 1))
        elif isinstance(s, If):
            out.extend(_depth_oracle(s.then, depth))
            out.extend(_depth_oracle(s.orelse, depth))
    return out


@settings(max_examples=150, deadline=None)
@given(programs())
def test_depths_match_tree_walk(prog):
    cfg = build_cfg(prog)
    assert [(c.label, c.depth) for c in cfg.call_sites()] == _depth_oracle(prog.statements)
    # every call site is counted once
    assert len(cfg.call_sites()) == len(prog.calls())


@settings(max_examples=150, deadline=None)
@given(programs())
def test_edges_forward_or_back(prog):
    cfg = build_cfg(prog)
    ids = {b.id for b in cfg.blocks}
    for src, dst in cfg.edges:
        assert src in ids and (dst in ids or dst == EXIT)
    # blocks are numbered in program order, so every block is reachable by forward edges
    reach, todo = {cfg.entry}, [cfg.entry]
    while todo:
        b = todo.pop()
        for d in cfg.succs(b):
            if d != EXIT and not cfg.is_back_edge(b, d) and d not in reach:
                reach.add(d)
                todo.append(d)
    assert reach == ids

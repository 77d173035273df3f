import json
import threading

import pytest

from agentjit.distributions import Fixed, Gamma
from agentjit.planlang import parse_plan
from agentjit.planner import (
    BernoulliMockGenerator, CorpusGenerator, Generation, PlannerConfig, plan, render_feedback,
)
from agentjit.validator import PARSE_ERROR, make_report, validate, Violation

from conftest import DASHDISH, HOME, plan_text


def test_corpus_selects_plan_c(manifests):
    gen = CorpusGenerator.from_dir(DASHDISH / "plans")
    out = plan("count stores", manifests, gen, PlannerConfig(n_workers=3, k_valid=2),
               initial_state=HOME)
    assert out.selected is not None
    assert out.selected.plan == plan_text("c")
    assert f"{out.selected.cost:.2f}" == "0.20"
    assert sorted(round(c.cost, 2) for c in out.candidates) == [0.2, 10.1]
    assert [r.plan for r in out.rejected] == [plan_text("a")]


def test_always_invalid_gives_nothing(manifests):
    gen = CorpusGenerator([plan_text("a")])
    out = plan("t", manifests, gen, PlannerConfig(n_workers=4, k_valid=1, m_max=1),
               initial_state=HOME)
    assert out.selected is None and out.candidates == ()
    assert len(out.rejected) == 4


def test_parse_failures_become_rejections(manifests):
    out = plan("t", manifests, CorpusGenerator(["call ("]), PlannerConfig(n_workers=1, k_valid=1))
    (rej,) = out.rejected
    assert rej.report.errors[0].kind == PARSE_ERROR


def test_no_manifests():
    with pytest.raises(ValueError):
        plan("t", {}, CorpusGenerator(["call a()"]))


def test_bernoulli_success_rate(manifests):
    p, n, runs = 0.3, 8, 1000
    gen = BernoulliMockGenerator(plan_text("c"), plan_text("a"), p)
    hits = 0
    for seed in range(runs):
        cfg = PlannerConfig(n_workers=n, k_valid=1, m_max=1, seed=seed)
        hits += plan("t", manifests, gen, cfg, HOME).selected is not None
    expected = 1 - (1 - p) ** n
    assert abs(hits / runs - expected) <= 0.02


def test_bernoulli_half(manifests):
    gen = BernoulliMockGenerator(plan_text("c"), plan_text("a"), 0.5)
    hits = sum(plan("t", manifests, gen, PlannerConfig(8, 1, 1, seed=s), HOME).selected
               is not None for s in range(1000))
    assert abs(hits / 1000 - (1 - 0.5 ** 8)) <= 0.02


class _CountingGenerator:
    """Always valid, instantly; records which (worker, attempt) pairs were asked."""

    def __init__(self, text, latency=None):
        self.text = text
        self.latency = latency
        self.calls = []
        self.lock = threading.Lock()

    def generate(self, task, manifests, feedback, rng, *, worker_id=0, attempt=0):
        with self.lock:
            self.calls.append((worker_id, attempt))
        lat = float(self.latency.sample(rng)) if self.latency else 0.0
        return Generation(self.text, lat)


@pytest.mark.parametrize("n, k, m", [(8, 1, 1), (8, 3, 2), (4, 4, 3), (2, 5, 3)])
def test_early_stop_bounds(manifests, n, k, m):
    gen = _CountingGenerator(plan_text("c"))
    out = plan("t", manifests, gen, PlannerConfig(n, k, m), HOME)
    workers = {w for w, _ in gen.calls}
    assert len(workers) <= n
    assert len(out.candidates) <= n * m
    if k <= n:
        assert len(out.candidates) >= k


def test_cutoff_keeps_plans_up_to_kth(manifests):
    gen = _CountingGenerator(plan_text("c"), Gamma(2.0, 3.0))
    out = plan("t", manifests, gen, PlannerConfig(8, 3, 1, seed=5), HOME)
    assert len(out.candidates) == 3
    times = [c.elapsed for c in out.candidates]
    assert times == sorted(times)


def test_retry_receives_feedback(manifests):
    seen = []

    class Gen:
        def generate(self, task, manifests, feedback, rng, *, worker_id=0, attempt=0):
            seen.append((attempt, feedback))
            return plan_text("a") if attempt == 0 else plan_text("c")

    out = plan("t", manifests, Gen(), PlannerConfig(1, 1, 3), HOME)
    assert out.selected.iteration == 1
    assert seen[0] == (0, None)
    assert "page_type" in seen[1][1] and "get_store_details" in seen[1][1]


def test_outcome_json_is_deterministic(manifests):
    gen = BernoulliMockGenerator(plan_text("c"), plan_text("a"), 0.4, Gamma(1.5, 2.0))
    docs = {json.dumps(plan("t", manifests, gen, PlannerConfig(8, 2, 3, seed=11), HOME)
                       .to_json(), sort_keys=True) for _ in range(5)}
    assert len(docs) == 1


def test_outcome_json_schema(manifests):
    gen = CorpusGenerator([plan_text("c")], Fixed(1.5))
    doc = plan("t", manifests, gen, PlannerConfig(1, 1, 1), HOME).to_json()
    assert doc["schema_version"] == 1
    assert doc["selected"]["elapsed_s"] == 1.5


def test_feedback_plan_a(manifests, plans):
    text = render_feedback(validate(plans["a"], manifests, HOME))
    assert "get_store_details" in text and "page_type" in text
    assert len(text.splitlines()) == 1


def test_feedback_two_violations():
    vs = [Violation("PreconditionUnmet", "x", (1, 1), "a", "k"),
          Violation("ArgTypeError", "y", (2, 1), "b", "j")]
    assert len(render_feedback(make_report(vs, {})).splitlines()) == 2


def test_feedback_lint_only(manifests):
    report = validate(parse_plan('call goto_store(store_name="x")'), manifests, HOME)
    assert report.valid and report.lints
    assert render_feedback(report) == ""

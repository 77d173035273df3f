import json

import numpy as np
import pytest

from agentjit.cli import HYPERPARAMETERS, main
from agentjit.distributions import Weibull
from agentjit.metrics import mock_records
from agentjit.traces import TraceRecord, TraceStep, write_traces

from conftest import DASHDISH, SCHED

PLANS = DASHDISH / "plans"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_plan_a(capsys):
    code, out, _ = run(capsys, "validate", "--plan", PLANS / "plan_a.plan",
                       "--state", '{"page_type": "home"}')
    assert code == 1
    doc = json.loads(out)
    assert doc["violations"][0]["kind"] == "PreconditionUnmet"
    assert doc["violations"][0]["key"] == "page_type"


def test_validate_plan_c(capsys):
    code, out, _ = run(capsys, "validate", "--plan", PLANS / "plan_c.plan",
                       "--manifests", DASHDISH / "manifests", "--state", '{"page_type": "home"}')
    assert code == 0 and json.loads(out)["valid"]


def test_validate_parse_error(capsys, tmp_path):
    (tmp_path / "bad.plan").write_text("call (")
    code, out, _ = run(capsys, "validate", "--plan", tmp_path / "bad.plan")
    assert code == 1
    assert json.loads(out)["violations"][0]["kind"] == "ParseError"


def test_cost_text(capsys):
    code, out, _ = run(capsys, "cost", "--plan", PLANS / "plan_c.plan", "--format", "text")
    assert code == 0 and out.strip() == "total 0.20"


def test_cost_flag_override(capsys):
    code, out, _ = run(capsys, "cost", "--plan", PLANS / "plan_b.plan", "--c-eval", "20",
                       "--format", "text")
    assert out.strip() == "total 20.10"


def test_schedule_ex2(capsys):
    code, out, _ = run(capsys, "schedule", "--usage", SCHED / "ex2_usage.json",
                       "--cache", SCHED / "ex2_cache.json", "--seed", 7)
    assert code == 0
    assert json.loads(out)["selected"] == "Hedge"


def test_schedule_text_table(capsys):
    code, out, _ = run(capsys, "schedule", "--usage", SCHED / "ex1_usage.json",
                       "--cache", SCHED / "ex1_cache.json", "--format", "text")
    assert out.strip().splitlines()[-1] == "selected Serial"


def test_plan_corpus(capsys):
    code, out, _ = run(capsys, "plan", "--generator", f"corpus:{PLANS}", "--k", 2,
                       "--planner-workers", 3)
    assert code == 0
    assert json.loads(out)["selected"]["cost"] == pytest.approx(0.2)


def test_plan_mock_deterministic(capsys):
    outs = {run(capsys, "plan", "--generator", "mock:p=0.3", "--k", 1, "--seed", 4)[1]
            for _ in range(3)}
    assert len(outs) == 1


def test_fit_and_simulate(capsys, tmp_path):
    rng = np.random.default_rng(0)
    recs = [TraceRecord(f"t{i}", (TraceStep(0, "restaurantCard", "home", float(x)),))
            for i, x in enumerate(Weibull(3.6, 10.25).sample(rng, 20))]
    write_traces(recs, tmp_path / "tr.json")
    code, _, err = run(capsys, "fit", "--traces", tmp_path / "tr.json", "--out",
                       tmp_path / "cache.json")
    assert code == 0 and "1 elements" in err
    doc = json.loads((tmp_path / "cache.json").read_text())
    assert "restaurantCard" in doc["elements"]

    code, out, _ = run(capsys, "simulate", "--plan", PLANS / "plan_c.plan",
                       "--env", DASHDISH / "env.json", "--manifests", DASHDISH / "manifests",
                       "--trials", 3, "--traces-out", tmp_path / "sim.json")
    doc = json.loads(out)
    assert code == 0 and doc["mean_s"] == 5.5 and doc["ok_runs"] == 3
    assert (tmp_path / "sim.json").exists()


def test_simulate_hedge_and_oracle(capsys):
    args = ["simulate", "--plan", PLANS / "plan_c.plan", "--env", DASHDISH / "env.json",
            "--manifests", DASHDISH / "manifests", "--trials", 5]
    code, out, _ = run(capsys, *args, "--strategy", "hedge")
    assert json.loads(out)["mean_s"] == 5.5 + 5.0
    code, out, _ = run(capsys, *args, "--strategy", "oracle")
    assert json.loads(out)["selected"] == "Serial"


def test_passk_csv(capsys, tmp_path):
    recs = mock_records(1184, 0.91, np.random.default_rng(0), Weibull(2.0, 10.0))
    (tmp_path / "runs.json").write_text(json.dumps(recs))
    code, out, _ = run(capsys, "passk", "--records", tmp_path / "runs.json", "--k", "1,3",
                       "--t", "1..3", "--workers", 8)
    lines = out.strip().splitlines()
    assert code == 0
    assert lines[0] == "metric,x,value"
    assert lines[1] == "pass@k,1,0.909628"
    assert len(lines) == 1 + 2 + 3


def test_help_lists_hyperparameters(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for key, (default, _, _) in HYPERPARAMETERS.items():
        assert f"--{key.replace('_', '-')}" in out
        assert str(default) in out


def test_subcommand_help_shows_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["schedule", "--help"])
    out = capsys.readouterr().out
    assert "(default: 1000)" in out and "(default: 5.0)" in out


def test_usage_error_prints_help(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["cost"])
    assert exc.value.code == 2
    assert "usage:" in capsys.readouterr().err


def test_no_command(capsys):
    assert main([]) == 2


def test_config_file_and_override(capsys, tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps({"c_tool": 1.0}))
    (tmp_path / "cfg.toml").write_text("c_tool = 1.0\ngamma = 2.0\n")
    _, out, _ = run(capsys, "cost", "--plan", PLANS / "plan_c.plan", "--format", "text",
                    "--config", tmp_path / "cfg.json")
    assert out.strip() == "total 2.00"
    _, out, _ = run(capsys, "cost", "--plan", PLANS / "plan_c.plan", "--format", "text",
                    "--config", tmp_path / "cfg.toml", "--c-tool", "0.5")
    assert out.strip() == "total 1.00"


def test_bad_config(capsys, tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps({"learning_rate": 1}))
    code, _, err = run(capsys, "cost", "--plan", PLANS / "plan_c.plan", "--config",
                       tmp_path / "cfg.json")
    assert code == 2 and "learning_rate" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "cost", "--plan", tmp_path / "nope.plan")
    assert code == 2 and "error" in err

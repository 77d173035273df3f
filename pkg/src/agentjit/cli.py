"""Command-line entry point: ``agentjit <subcommand> ...``.

Exit codes: 0 success, 1 plan rejected by ``validate``, 2 usage or
configuration error.  Machine-readable output goes to stdout and
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .cost import CostModel, estimate_cost
from .distributions import LatencyDistribution, cache_to_json, load_cache
from .errors import AgentJitError, ConfigError, ParseError, PlanSchemaError
from .planlang import load_plan
from .planner import BernoulliMockGenerator, CorpusGenerator, PlannerConfig, plan
from .protocol import load_manifests
from .scheduler import FixtureUsageProvider, SchedulerConfig, Strategy, load_usage, select_strategy
from .simulator import load_env, oracle_strategy, run_plan, run_strategy
from .traces import build_scheduler_cache, ingest, write_traces
from .validator import PARSE_ERROR, Violation, make_report, validate

DATA_DIR = Path(__file__).parent / "data"

# name -> (default, type, help)
HYPERPARAMETERS = {
    "k": (32, int, "valid candidate plans collected before selection"),
    "m_max": (1, int, "planner attempts per worker"),
    "c_tool": (0.1, float, "cost weight of a tool call"),
    "c_eval": (10.0, float, "cost weight of an eval call"),
    "gamma": (10.0, float, "loop nesting penalty"),
    "planner_workers": (8, int, "concurrent plan generators"),
    "n_mc": (1000, int, "Monte Carlo trials per strategy"),
    "workers": (4, int, "parallel/hedge worker budget"),
    "delta_p": (20.0, float, "parallel overhead in seconds"),
    "delta_h": (5.0, float, "hedge overhead in seconds"),
    "c_read": (5.0, float, "page read cost in seconds per page"),
    "c_repeat": (5.0, float, "cost of a repeat interaction in seconds"),
    "seed": (0, int, "master random seed"),
}

SUBCOMMAND_PARAMS = {
    "cost": ("c_tool", "c_eval", "gamma"),
    "plan": ("k", "m_max", "c_tool", "c_eval", "gamma", "planner_workers", "seed"),
    "schedule": ("n_mc", "workers", "delta_p", "delta_h", "c_read", "c_repeat", "seed"),
    "simulate": ("workers", "delta_p", "delta_h", "c_read", "c_repeat", "seed"),
    "passk": ("planner_workers",),
    "validate": (),
    "fit": (),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _hyper_epilog():
    lines = ["hyperparameters (flag / config key: default):"]
    for name, (default, _, text) in HYPERPARAMETERS.items():
        lines.append(f"  --{name.replace('_', '-'):<16} {name:<16} {default!s:<7} {text}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="agentjit", description="Validate, cost, plan, schedule and simulate "
                "agent tool plans.", epilog=_hyper_epilog(),
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def cmd(name, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--config", help="JSON or TOML file of hyperparameters (flat keys)")
        for key in SUBCOMMAND_PARAMS[name]:
            default, typ, text = HYPERPARAMETERS[key]
            flags = [f"--{key.replace('_', '-')}"]
            if name == "passk" and key == "planner_workers":
                flags.append("--workers")
            sp.add_argument(*flags, dest=key, type=typ, default=None,
                            help=f"{text} (default: {default})")
        return sp

    sp = cmd("validate", "statically check a plan against tool manifests")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--manifests", default=str(DATA_DIR / "dashdish" / "manifests"))
    sp.add_argument("--state", help="initial state as JSON text or a JSON file")

    sp = cmd("cost", "estimate the unitless cost of a plan")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--format", choices=("json", "text"), default="json")

    sp = cmd("plan", "sample, validate and cost candidate plans; print the outcome")
    sp.add_argument("--task", default="")
    sp.add_argument("--manifests", default=str(DATA_DIR / "dashdish" / "manifests"))
    sp.add_argument("--generator", required=True,
                    help="corpus:DIR or mock:p=0.9[,valid=FILE,invalid=FILE]")
    sp.add_argument("--state", help="initial state as JSON text or a JSON file")

    sp = cmd("schedule", "pick Serial, Hedge or Parallel by Monte Carlo estimation")
    sp.add_argument("--task", default="")
    sp.add_argument("--usage", required=True, help="usage-plan fixture JSON")
    sp.add_argument("--cache", required=True, help="scheduler cache JSON")
    sp.add_argument("--format", choices=("json", "text"), default="json")

    sp = cmd("fit", "fit a scheduler cache from trace files")
    sp.add_argument("--traces", nargs="+", required=True)
    sp.add_argument("--out", help="write the cache here instead of stdout")
    sp.add_argument("--include-failures", action="store_true")

    sp = cmd("simulate", "run a plan in a simulated environment")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--env", required=True)
    sp.add_argument("--manifests", default=None)
    sp.add_argument("--strategy", default="serial",
                    choices=("serial", "hedge", "parallel", "oracle"))
    sp.add_argument("--trials", type=int, default=1)
    sp.add_argument("--traces-out", help="write serial-run traces to this file")

    sp = cmd("passk", "Pass@k and Pass@t curves from run records (CSV)")
    sp.add_argument("--records", required=True, help="JSON list of {valid, latency_s}")
    sp.add_argument("--k", default="1,3,5")
    sp.add_argument("--t", default="1..30")
    return p


def _load_config(path) -> dict:
    if not path:
        return {}
    text = Path(path).read_text()
    try:
        if str(path).endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            doc = tomllib.loads(text)
        else:
            doc = json.loads(text)
    except Exception as exc:
        raise ConfigError(f"{path}: {exc}") from None
    unknown = sorted(set(doc) - set(HYPERPARAMETERS))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    out = {}
    for key, value in doc.items():
        typ = HYPERPARAMETERS[key][1]
        try:
            out[key] = typ(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: {key} must be {typ.__name__}") from None
    return out


def _settings(args) -> dict:
    values = {k: d for k, (d, _, _) in HYPERPARAMETERS.items()}
    values.update(_load_config(args.config))
    for key in HYPERPARAMETERS:
        if getattr(args, key, None) is not None:
            values[key] = getattr(args, key)
    return values


def _read_state(text):
    if not text:
        return None
    p = Path(text)
    return json.loads(p.read_text() if p.is_file() else text)


def _read_plan(path):
    return load_plan(Path(path))


def _emit(doc):
    print(json.dumps(doc, indent=2, sort_keys=True))


def _cost_model(s):
    return CostModel(s["c_tool"], s["c_eval"], s["gamma"])


def _scheduler_config(s, n_mc=None):
    return SchedulerConfig(n_mc=n_mc or s["n_mc"], n_workers=s["workers"], delta_p=s["delta_p"],
                           delta_h=s["delta_h"], c_read=s["c_read"], c_repeat=s["c_repeat"],
                           seed=s["seed"])


def cmd_validate(args, s):
    manifests = load_manifests(args.manifests)
    try:
        program = _read_plan(args.plan)
    except (ParseError, PlanSchemaError) as exc:
        report = make_report([Violation(PARSE_ERROR, str(exc), (getattr(exc, "line", 0),
                                                                 getattr(exc, "col", 0)))], {})
    else:
        report = validate(program, manifests, _read_state(args.state))
    _emit(report.to_json())
    return 0 if report.valid else 1


def cmd_cost(args, s):
    est = estimate_cost(_read_plan(args.plan), _cost_model(s))
    if args.format == "text":
        print(f"total {est.total:.2f}")
    else:
        _emit(est.to_json())
    return 0


def _generator(spec):
    kind, _, rest = spec.partition(":")
    if kind == "corpus":
        return CorpusGenerator.from_dir(rest)
    if kind == "mock":
        opts = dict(kv.split("=", 1) for kv in rest.split(",") if kv)
        plans = DATA_DIR / "dashdish" / "plans"
        valid = Path(opts.get("valid", plans / "plan_c.plan")).read_text()
        invalid = Path(opts.get("invalid", plans / "plan_a.plan")).read_text()
        latency = None
        if "latency" in opts:
            latency = LatencyDistribution.from_json(json.loads(opts["latency"]))
        return BernoulliMockGenerator(valid, invalid, float(opts.get("p", 0.5)), latency)
    raise ConfigError(f"unknown generator {spec!r}; use corpus:DIR or mock:p=P")


def cmd_plan(args, s):
    config = PlannerConfig(n_workers=s["planner_workers"], k_valid=s["k"], m_max=s["m_max"],
                           cost_model=_cost_model(s), seed=s["seed"])
    state = _read_state(args.state)
    if state is None:
        state = {"page_type": "home"}
    outcome = plan(args.task, load_manifests(args.manifests), _generator(args.generator),
                   config, state)
    _emit(outcome.to_json())
    return 0


def cmd_schedule(args, s):
    provider = FixtureUsageProvider(load_usage(args.usage))
    decision = select_strategy(args.task, provider, load_cache(args.cache),
                               _scheduler_config(s))
    if args.format == "text":
        print(f"{'strategy':<10} {'mean_s':>9} {'win_rate':>9}")
        for e in decision.estimates:
            print(f"{e.strategy.value:<10} {e.mean_s:>9.2f} {e.win_rate:>9.3f}")
        print(f"selected {decision.selected.value}")
    else:
        _emit(decision.to_json())
    return 0


def cmd_fit(args, s):
    obs = ingest(args.traces, include_failures=args.include_failures)
    doc = cache_to_json(build_scheduler_cache(obs))
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"{len(obs)} elements, {obs.n_steps} steps, {obs.n_excluded} excluded",
          file=sys.stderr)
    return 0


def cmd_simulate(args, s):
    program = _read_plan(args.plan)
    env = load_env(args.env)
    manifests = load_manifests(args.manifests) if args.manifests else {}
    config = _scheduler_config(s)
    if args.strategy == "oracle":
        _emit(oracle_strategy(program, manifests, env, config, args.trials, s["seed"]).to_json())
        return 0
    rng = np.random.default_rng(s["seed"])
    if args.strategy == "serial":
        runs = [run_plan(program, manifests, env, rng) for _ in range(args.trials)]
        lat = [r.latency_s for r in runs]
        ok = sum(r.ok for r in runs)
        errors = sorted({str(r.error) for r in runs if r.error})
        if args.traces_out:
            write_traces([r.trace for r in runs], args.traces_out)
    else:
        lat = [run_strategy(program, Strategy(args.strategy.capitalize()), manifests, env,
                            config, rng) for _ in range(args.trials)]
        ok, errors = None, []
    _emit({"schema_version": 1, "strategy": args.strategy, "trials": args.trials,
           "mean_s": float(np.mean(lat)), "std_s": float(np.std(lat)),
           "min_s": float(np.min(lat)), "max_s": float(np.max(lat)),
           "ok_runs": ok, "errors": errors})
    return 0


def cmd_passk(args, s):
    records = json.loads(Path(args.records).read_text())
    if isinstance(records, dict):
        records = records.get("records", [])
    rows = metrics.pass_curves(records, metrics.parse_int_list(args.k),
                               metrics.parse_range(args.t), s["planner_workers"])
    sys.stdout.write(metrics.rows_to_csv(rows))
    return 0


COMMANDS = {"validate": cmd_validate, "cost": cmd_cost, "plan": cmd_plan,
            "schedule": cmd_schedule, "fit": cmd_fit, "simulate": cmd_simulate,
            "passk": cmd_passk}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help(sys.stderr)
        return 2
    try:
        settings = _settings(args)
        return COMMANDS[args.command](args, settings)
    except (AgentJitError, OSError, ValueError, KeyError) as exc:
        print(f"agentjit {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

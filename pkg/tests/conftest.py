from pathlib import Path

import pytest

from agentjit.planlang import load_plan
from agentjit.protocol import load_manifests

DATA = Path(__file__).resolve().parents[1] / "src" / "agentjit" / "data"
DASHDISH = DATA / "dashdish"
SCHED = DATA / "scheduler"
HOME = {"page_type": "home"}


def plan_text(name):
    return (DASHDISH / "plans" / f"plan_{name}.plan").read_text()


@pytest.fixture(scope="session")
def manifests():
    return load_manifests(DASHDISH / "manifests")


@pytest.fixture(scope="session")
def plans():
    return {n: load_plan(plan_text(n)) for n in "abc"}


# acceptance results, printed once at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])

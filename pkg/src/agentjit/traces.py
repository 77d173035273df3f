"""Execution traces in, scheduler cache and planner cache index out."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .distributions import MIN_PARAMETRIC_OBS, ElementStats, dump_cache, fit
from .errors import MalformedTrace, ManifestError
from .protocol import ToolManifest


@dataclass(frozen=True)
class TraceStep:
    index: int
    element: str
    page: str
    latency_s: float
    success: bool = True
    is_modal: bool = False
    modal_name: str | None = None

    def to_json(self):
        return {"index": self.index, "element": self.element, "page": self.page,
                "latency_s": self.latency_s, "success": self.success,
                "is_modal": self.is_modal, "modal_name": self.modal_name}


@dataclass(frozen=True)
class TraceRecord:
    task_id: str
    steps: tuple = ()

    def to_json(self):
        return {"task_id": self.task_id, "steps": [s.to_json() for s in self.steps]}

    @classmethod
    def from_json(cls, doc, path="<trace>") -> "TraceRecord":
        if not isinstance(doc, Mapping) or "steps" not in doc:
            raise MalformedTrace(path, "trace record must be an object with 'steps'")
        if not isinstance(doc["steps"], list):
            raise MalformedTrace(path, "'steps' must be a list")
        steps = []
        for i, s in enumerate(doc["steps"]):
            try:
                step = TraceStep(int(s["index"]), str(s["element"]), str(s.get("page", "")),
                                 float(s["latency_s"]), bool(s.get("success", True)),
                                 bool(s.get("is_modal", False)), s.get("modal_name"))
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedTrace(path, f"step {i}: bad or missing field {exc}") from None
            if not (step.latency_s >= 0 and math.isfinite(step.latency_s)):
                raise MalformedTrace(path, f"step {i}: latency must be finite and >= 0")
            if steps and step.index <= steps[-1].index:
                raise MalformedTrace(path, f"step {i}: indices must strictly increase")
            steps.append(step)
        return cls(str(doc.get("task_id", "")), tuple(steps))


def read_traces(path) -> list[TraceRecord]:
    """A trace file holds one record, a list of records, or ``{"traces": [...]}``."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedTrace(str(path), str(exc)) from None
    if isinstance(doc, Mapping) and "traces" in doc:
        doc = doc["traces"]
    docs = doc if isinstance(doc, list) else [doc]
    return [TraceRecord.from_json(d, str(path)) for d in docs]


def write_traces(records: Iterable[TraceRecord], path) -> None:
    doc = {"traces": [r.to_json() for r in records]}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


class Observations(dict):
    """element -> latency list, with the page each element was seen on."""

    def __init__(self):
        super().__init__()
        self.pages: dict[str, str] = {}
        self.n_steps = 0
        self.n_excluded = 0


def ingest_records(records: Iterable[TraceRecord], include_failures=False) -> Observations:
    obs = Observations()
    for rec in records:
        for step in rec.steps:
            obs.n_steps += 1
            if not step.success and not include_failures:
                obs.n_excluded += 1
                continue
            obs.setdefault(step.element, []).append(step.latency_s)
            obs.pages.setdefault(step.element, step.page)
    return obs


def ingest(trace_files: Iterable, include_failures=False) -> Observations:
    """Group step latencies by element; failed steps are dropped unless asked for."""
    records = [r for f in trace_files for r in read_traces(f)]
    return ingest_records(records, include_failures)


def build_scheduler_cache(observations: Mapping[str, list],
                          min_parametric: int = MIN_PARAMETRIC_OBS) -> dict[str, ElementStats]:
    pages = getattr(observations, "pages", {})
    return {e: ElementStats(e, fit(observations[e], min_parametric), len(observations[e]),
                            pages.get(e, ""))
            for e in sorted(observations)}


def write_scheduler_cache(observations, path, min_parametric=MIN_PARAMETRIC_OBS):
    cache = build_scheduler_cache(observations, min_parametric)
    dump_cache(cache, path)
    return cache


# -- planner cache index ----------------------------------------------------

@dataclass(frozen=True)
class PlannerCacheEntry:
    action: str
    manifest_path: str
    created_from: tuple = ()

    def load_manifest(self, base=".") -> ToolManifest:
        path = Path(base) / self.manifest_path
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"{path}: {exc}") from None
        return ToolManifest.from_json(doc, str(path))


def write_planner_index(entries: Iterable[PlannerCacheEntry], path) -> None:
    doc = {"schema_version": 1,
           "actions": {e.action: {"manifest": e.manifest_path,
                                  "created_from": list(e.created_from)}
                       for e in sorted(entries, key=lambda e: e.action)}}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_planner_index(path, check=True) -> dict[str, PlannerCacheEntry]:
    """Read the action index; with ``check`` every manifest must load and validate."""
    path = Path(path)
    doc = json.loads(path.read_text())
    actions = doc.get("actions", doc) if isinstance(doc, Mapping) else {}
    actions = {k: v for k, v in actions.items() if k != "schema_version"}
    out = {}
    for action, spec in actions.items():
        entry = PlannerCacheEntry(action, spec["manifest"], tuple(spec.get("created_from", ())))
        if check:
            m = entry.load_manifest(path.parent)
            if m.name != action:
                raise ManifestError(f"{entry.manifest_path}: manifest names tool {m.name!r}, "
                                    f"index says {action!r}")
        out[action] = entry
    return out

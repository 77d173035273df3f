"""Contract-checked plan compilation and Monte Carlo scheduling for UI agents."""

from .cost import CostModel, estimate_cost, rank
from .distributions import Empirical, Fixed, Gamma, LogNormal, Weibull, fit
from .planlang import load_plan, parse_plan
from .planner import PlannerConfig, plan
from .protocol import ToolManifest, load_manifests
from .scheduler import SchedulerConfig, Strategy, UsagePlan, select_strategy
from .validator import validate

__version__ = "0.1.0"

__all__ = [
    "CostModel", "Empirical", "Fixed", "Gamma", "LogNormal", "PlannerConfig",
    "SchedulerConfig", "Strategy", "ToolManifest", "UsagePlan", "Weibull", "estimate_cost",
    "fit", "load_manifests", "load_plan", "parse_plan", "plan", "rank", "select_strategy",
    "validate",
]

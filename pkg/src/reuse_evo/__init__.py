"""Hierarchical evolutionary search over a frozen generator's input space,
on synthetic dual-objective landscapes."""

from .core import (
    Candidate,
    ConfigError,
    EvaluatorStage,
    LandscapeSpec,
    LatentPoint,
    PriorSpec,
    SearchConfig,
    TaskContext,
    default_config,
)
from .evolution import RunResult, run_search
from .generator import decode_family, default_task, sample_prior
from .panel import Panel, build_panel

__all__ = [
    "Candidate",
    "ConfigError",
    "EvaluatorStage",
    "LandscapeSpec",
    "LatentPoint",
    "Panel",
    "PriorSpec",
    "RunResult",
    "SearchConfig",
    "TaskContext",
    "build_panel",
    "decode_family",
    "default_config",
    "default_task",
    "run_search",
    "sample_prior",
]

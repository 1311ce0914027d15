"""Run configuration documents (YAML) with sections search, task, funnel, output."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Any

import yaml

from .core import (
    ConfigError,
    EvaluatorStage,
    LandscapeSpec,
    PriorSpec,
    SearchConfig,
    TaskContext,
    default_config,
)
from .generator import default_task

SECTIONS = ("search", "task", "funnel", "output")
_SEARCH_KEYS = tuple(f.name for f in fields(SearchConfig) if f.name != "funnel")
_TASK_KEYS = tuple(f.name for f in fields(TaskContext))
_LANDSCAPE_KEYS = tuple(f.name for f in fields(LandscapeSpec))
_PRIOR_KEYS = tuple(f.name for f in fields(PriorSpec))
_STAGE_KEYS = ("noise_sigma", "cost_units")
_OUTPUT_KEYS = ("directory", "formats")
FORMATS = ("trace", "panel", "metrics")


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "reuse_out"
    formats: tuple[str, ...] = FORMATS


@dataclass(frozen=True)
class RunConfigDocument:
    search: SearchConfig = field(default_factory=default_config)
    task: TaskContext = field(default_factory=default_task)
    output: OutputSpec = OutputSpec()


def _reject_unknown(section: str, data: dict, allowed) -> None:
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key {section}.{key}")


def _mapping(section: str, value) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"section {section} must be a mapping")
    return value


def config_to_dict(cfg: SearchConfig) -> dict:
    out = {k: getattr(cfg, k) for k in _SEARCH_KEYS}
    out["stage_budgets"] = list(cfg.stage_budgets)
    return out


def funnel_to_list(cfg: SearchConfig) -> list[dict]:
    return [{"noise_sigma": s.noise_sigma, "cost_units": s.cost_units} for s in cfg.funnel]


def _landscape_to_dict(spec: LandscapeSpec) -> dict:
    return {"center": list(spec.center), "scale": spec.scale, "noise_sigma": spec.noise_sigma, "kind": spec.kind}


def task_to_dict(ctx: TaskContext) -> dict:
    out = {k: getattr(ctx, k) for k in _TASK_KEYS}
    out["landscape_a"] = _landscape_to_dict(ctx.landscape_a)
    out["landscape_b"] = _landscape_to_dict(ctx.landscape_b)
    out["prior"] = {"mode": ctx.prior.mode, "anchors": [list(a) for a in ctx.prior.anchors], "sigma": ctx.prior.sigma}
    return out


def document_to_dict(doc: RunConfigDocument) -> dict:
    return {
        "search": config_to_dict(doc.search),
        "task": task_to_dict(doc.task),
        "funnel": funnel_to_list(doc.search),
        "output": {"directory": doc.output.directory, "formats": list(doc.output.formats)},
    }


def dump_document(doc: RunConfigDocument) -> str:
    return yaml.safe_dump(document_to_dict(doc), sort_keys=False)


def _build_task(data: dict, d_z: int) -> TaskContext:
    _reject_unknown("task", data, _TASK_KEYS)
    base = default_task(d_z)
    kw: dict[str, Any] = {}
    for key, value in data.items():
        if key in ("landscape_a", "landscape_b"):
            sub = _mapping(f"task.{key}", value)
            _reject_unknown(f"task.{key}", sub, _LANDSCAPE_KEYS)
            cur = getattr(base, key)
            merged = {k: getattr(cur, k) for k in _LANDSCAPE_KEYS}
            merged.update(sub)
            kw[key] = LandscapeSpec(**merged)
        elif key == "prior":
            sub = _mapping("task.prior", value)
            _reject_unknown("task.prior", sub, _PRIOR_KEYS)
            merged = {k: getattr(base.prior, k) for k in _PRIOR_KEYS}
            merged.update(sub)
            kw[key] = PriorSpec(**merged)
        else:
            kw[key] = value
    base_kw = {k: getattr(base, k) for k in _TASK_KEYS}
    base_kw.update(kw)
    return TaskContext(**base_kw)


def document_from_dict(data: dict) -> RunConfigDocument:
    """Build a document; absent keys take defaults, unknown keys raise ``ConfigError``."""
    data = _mapping("document", data)
    _reject_unknown("document", data, SECTIONS)
    search = _mapping("search", data.get("search"))
    _reject_unknown("search", search, _SEARCH_KEYS)
    kw = dict(search)
    if "stage_budgets" in kw:
        kw["stage_budgets"] = tuple(kw["stage_budgets"])
    if "funnel" in data:
        stages = data["funnel"]
        if not isinstance(stages, list):
            raise ConfigError("section funnel must be a list of stages")
        built = []
        for i, st in enumerate(stages, start=1):
            st = _mapping(f"funnel[{i}]", st)
            _reject_unknown(f"funnel[{i}]", st, _STAGE_KEYS)
            built.append(EvaluatorStage(i, **st))
        kw["funnel"] = tuple(built)
    try:
        cfg = default_config(**kw)
        task = _build_task(_mapping("task", data.get("task")), cfg.d_z)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    if task.dim != cfg.d_z:
        raise ConfigError(f"task landscapes have dimension {task.dim}, search.d_z is {cfg.d_z}")
    out = _mapping("output", data.get("output"))
    _reject_unknown("output", out, _OUTPUT_KEYS)
    formats = tuple(out.get("formats", FORMATS))
    for f in formats:
        if f not in FORMATS:
            raise ConfigError(f"unknown output format {f!r}")
    output = OutputSpec(directory=str(out.get("directory", OutputSpec.directory)), formats=formats)
    return RunConfigDocument(search=cfg, task=task, output=output)


def load_document(text: str) -> RunConfigDocument:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return document_from_dict(data or {})


def load_document_file(path) -> RunConfigDocument:
    with open(path, encoding="utf-8") as fh:
        return load_document(fh.read())

"""Multi-fidelity affinity estimates, chemistry score, feasibility and dissimilarity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import DEFAULT_FUNNEL, Candidate, ConfigError, EvaluatorStage, SearchConfig, stream
from .kernels import tanimoto_matrix

TARGETS = ("a", "b")

INVALID_MOLECULE = "invalid_molecule"
QED_BELOW_FLOOR = "qed_below_floor"
SA_BELOW_FLOOR = "sa_below_floor"
MISSING_AFFINITY = "missing_affinity"
PARENT_DEVIATION_EXCEEDED = "parent_deviation_exceeded"

__all__ = [
    "DEFAULT_FUNNEL",
    "EvaluatorStage",
    "FeasibilityReport",
    "CostLedger",
    "affinity",
    "evaluate_stage",
    "chemistry_score",
    "feasibility",
    "tanimoto_similarity",
    "tanimoto_distance",
    "distance_matrix",
]


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    reasons: tuple[str, ...] = ()

    def __post_init__(self):
        if self.feasible != (not self.reasons):
            raise ValueError("feasible must hold exactly when there are no reasons")


@dataclass
class CostLedger:
    """Simulated evaluation cost, split by purpose."""

    funnel: float = 0.0
    fitness: float = 0.0
    per_stage: dict = field(default_factory=dict)

    def charge_stage(self, stage: EvaluatorStage, count: int) -> None:
        amount = stage.cost_units * count
        self.funnel += amount
        self.per_stage[stage.stage_index] = self.per_stage.get(stage.stage_index, 0.0) + amount

    @property
    def total(self) -> float:
        return self.funnel + self.fitness


def _check_stage(stage) -> EvaluatorStage:
    if not isinstance(stage, EvaluatorStage):
        raise ConfigError(f"unknown evaluator stage {stage!r}")
    return stage


def affinity(m: Candidate, target: str, stage: EvaluatorStage, rng_seed: int) -> float:
    """Stage estimate of ``m`` against ``target``: true utility plus stage noise."""
    stage = _check_stage(stage)
    if target not in TARGETS:
        raise ConfigError(f"unknown target {target!r}")
    t = TARGETS.index(target)
    base = m.base_affinity[t]
    if stage.noise_sigma == 0.0:
        return float(base)
    rng = stream(rng_seed, "affinity", stage.stage_index, m.id, t)
    return float(base + stage.noise_sigma * rng.standard_normal())


def evaluate_stage(m: Candidate, stage: EvaluatorStage, rng_seed: int) -> Candidate:
    """Copy of ``m`` with both stage estimates filled in."""
    a = affinity(m, "a", stage, rng_seed)
    b = affinity(m, "b", stage, rng_seed)
    return m.with_affinity(stage.stage_index, a, b)


def chemistry_score(m: Candidate) -> float:
    return (m.qed_like + m.sa_like) / 2.0


def tanimoto_similarity(fp1: int, fp2: int) -> float:
    union = (fp1 | fp2).bit_count()
    if union == 0:
        return 1.0
    return (fp1 & fp2).bit_count() / union


def tanimoto_distance(m1: Candidate, m2: Candidate) -> float:
    return 1.0 - tanimoto_similarity(m1.features, m2.features)


def distance_matrix(cands: Sequence[Candidate]) -> np.ndarray:
    fps = np.fromiter((c.features for c in cands), dtype=np.uint64, count=len(cands))
    return tanimoto_matrix(fps)


def feasibility(
    m: Candidate,
    cfg: SearchConfig,
    stage_index: int,
    parent: Optional[Candidate] = None,
) -> FeasibilityReport:
    """Hard admissibility of ``m`` at ``stage_index``.

    Stage 0 requires no affinities. A parent, when given, bounds structural
    deviation through ``cfg.parent_similarity_floor``.
    """
    reasons = []
    if not m.valid:
        reasons.append(INVALID_MOLECULE)
    if m.qed_like < cfg.qed_floor:
        reasons.append(QED_BELOW_FLOOR)
    if m.sa_like < cfg.sa_floor:
        reasons.append(SA_BELOW_FLOOR)
    if stage_index >= 1:
        aff = m.stage_affinity(stage_index)
        if aff is None or not all(math.isfinite(x) for x in aff):
            reasons.append(MISSING_AFFINITY)
    if parent is not None:
        if tanimoto_similarity(m.features, parent.features) < cfg.parent_similarity_floor:
            reasons.append(PARENT_DEVIATION_EXCEEDED)
    return FeasibilityReport(feasible=not reasons, reasons=tuple(reasons))

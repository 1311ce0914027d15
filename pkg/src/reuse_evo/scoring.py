"""Scalar scores: balance-aware affinity, stage score, family utility and panel utility."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import Candidate, LatentPoint, SearchConfig, TaskContext, lex_key
from .evaluators import chemistry_score, distance_matrix, evaluate_stage, feasibility, tanimoto_distance
from .generator import decode_family
from .kernels import min_offdiag


@dataclass(frozen=True)
class ScoredCandidate:
    candidate_id: int
    feasible: bool
    h: float
    f_aff: float
    chem_term: float
    div_term: float
    reasons: tuple[str, ...] = ()

    @property
    def components(self) -> tuple[float, float, float]:
        return self.f_aff, self.chem_term, self.div_term

    @property
    def key(self) -> tuple:
        return lex_key(self.feasible, self.h, self.candidate_id)


def balance_affinity(A_a: float, A_b: float, ctx: TaskContext) -> float:
    return ctx.w_a * A_a + ctx.w_b * A_b - ctx.lambda_bal * abs(A_a - A_b)


def diversity_term(m: Candidate, pool: Sequence[Candidate]) -> float:
    others = [c for c in pool if c.id != m.id]
    if not others:
        return 0.0
    return min(tanimoto_distance(m, c) for c in others)


def chem_weight(stage_index: int, cfg: SearchConfig) -> float:
    if stage_index == cfg.S and cfg.S > 1:
        return cfg.beta_chem_rerank
    return cfg.beta_chem_search


def _score(m, stage_index, cfg, ctx, q_div, parent=None) -> ScoredCandidate:
    report = feasibility(m, cfg, stage_index, parent)
    aff = m.stage_affinity(stage_index)
    if aff is None or not all(math.isfinite(x) for x in aff):
        f_aff = -math.inf
    else:
        f_aff = balance_affinity(aff[0], aff[1], ctx)
    chem = chem_weight(stage_index, cfg) * chemistry_score(m)
    div = cfg.beta_div_subset * q_div
    return ScoredCandidate(
        candidate_id=m.id,
        feasible=report.feasible,
        h=f_aff + chem + div,
        f_aff=f_aff,
        chem_term=chem,
        div_term=div,
        reasons=report.reasons,
    )


def stage_score(
    m: Candidate,
    pool: Sequence[Candidate],
    stage_index: int,
    cfg: SearchConfig,
    ctx: TaskContext,
    parent: Optional[Candidate] = None,
) -> ScoredCandidate:
    """Stage score of ``m`` with its diversity term taken against ``pool``."""
    return _score(m, stage_index, cfg, ctx, diversity_term(m, pool), parent)


def score_pool(
    pool: Sequence[Candidate],
    stage_index: int,
    cfg: SearchConfig,
    ctx: TaskContext,
    parents: Optional[Mapping[int, Candidate]] = None,
) -> list[ScoredCandidate]:
    """Batch ``stage_score`` over a whole pool with one distance matrix."""
    if not pool:
        return []
    q_div = min_offdiag(distance_matrix(pool))
    parents = parents or {}
    return [
        _score(m, stage_index, cfg, ctx, float(q_div[i]), parents.get(m.id))
        for i, m in enumerate(pool)
    ]


def rank_scored(scored: Sequence[ScoredCandidate]) -> list[ScoredCandidate]:
    return sorted(scored, key=lambda s: s.key)


def top_l_mean(scored: Sequence[ScoredCandidate], L: int) -> float:
    ranked = rank_scored(scored)
    top = ranked[: min(L, len(ranked))]
    return sum(s.h for s in top) / len(top)


def evaluate_family(
    z: LatentPoint,
    ctx: TaskContext,
    cfg: SearchConfig,
    rng_seed: int,
    first_id: int = 0,
) -> tuple[float, list[Candidate], list[ScoredCandidate]]:
    """Family utility plus the decoded, stage-1 scored family behind it."""
    stage = cfg.funnel[0]
    family = decode_family(z, ctx, cfg.M_eval, rng_seed, first_id=first_id)
    family = [evaluate_stage(m, stage, rng_seed) for m in family]
    scored = score_pool(family, stage.stage_index, cfg, ctx)
    return top_l_mean(scored, cfg.L), family, scored


def family_utility(z: LatentPoint, ctx: TaskContext, cfg: SearchConfig, rng_seed: int) -> float:
    """Mean stage-1 score of the top ``L`` family members under feasibility-first ranking."""
    return evaluate_family(z, ctx, cfg, rng_seed)[0]


def _members(S) -> list[Candidate]:
    return list(getattr(S, "members", S))


def panel_diversity(members: Sequence[Candidate]) -> float:
    n = len(members)
    if n < 2:
        return 0.0
    dist = distance_matrix(members)
    return float(dist[np.triu_indices(n, 1)].mean())


def member_value(m: Candidate, cfg: SearchConfig, ctx: TaskContext) -> float:
    """Per-member part of the panel utility (affinity, chemistry, balance gap)."""
    aff = m.stage_affinity(cfg.S)
    if aff is None:
        return -math.inf
    return (
        cfg.eta_aff * balance_affinity(aff[0], aff[1], ctx)
        + cfg.eta_chem * chemistry_score(m)
        - cfg.beta_bal_subset * abs(aff[0] - aff[1])
    )


def panel_utility(S, cfg: SearchConfig, ctx: TaskContext) -> float:
    """Set utility of a panel; ``-inf`` for the empty panel.

    Mean member value plus ``eta_div`` times the mean pairwise Tanimoto
    distance. Setting ``beta_bal_subset = 0`` drops the balance-gap penalty.
    """
    members = _members(S)
    if not members:
        return -math.inf
    mean_value = sum(member_value(m, cfg, ctx) for m in members) / len(members)
    return mean_value + cfg.eta_div * panel_diversity(members)

"""Set-level panel construction and incumbent tracking."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import Candidate, SearchConfig, TaskContext
from .evaluators import chemistry_score, distance_matrix, feasibility
from .kernels import best_subset, has_clique
from .scoring import balance_affinity, member_value, panel_utility


@dataclass(frozen=True)
class Panel:
    members: tuple[Candidate, ...] = ()
    utility: float = -math.inf
    source_iteration: int = 0

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def empty(self) -> bool:
        return not self.members

    @property
    def ids(self) -> list[int]:
        return [m.id for m in self.members]


EMPTY_PANEL = Panel()


def make_panel(members: Sequence[Candidate], cfg: SearchConfig, ctx: TaskContext, source_iteration: int = 0) -> Panel:
    members = tuple(sorted(members, key=lambda m: m.id))
    if not members:
        return Panel(source_iteration=source_iteration)
    return Panel(members, panel_utility(members, cfg, ctx), source_iteration)


def _feasible_members(pool, cfg, parents) -> list[Candidate]:
    parents = parents or {}
    return [m for m in pool if feasibility(m, cfg, cfg.S, parents.get(m.id)).feasible]


def panel_violations(
    panel: Panel,
    cfg: SearchConfig,
    ctx: TaskContext,
    parents: Optional[Mapping[int, Candidate]] = None,
) -> list[str]:
    """Every broken panel invariant, described; empty when the panel is sound."""
    out = []
    if panel.empty:
        if panel.utility != -math.inf:
            out.append("empty panel with finite utility")
        return out
    if len(panel.members) != cfg.N:
        out.append(f"panel has {len(panel.members)} members, expected {cfg.N}")
    parents = parents or {}
    for m in panel.members:
        rep = feasibility(m, cfg, cfg.S, parents.get(m.id))
        if not rep.feasible:
            out.append(f"member {m.id} infeasible: {','.join(rep.reasons)}")
    dist = distance_matrix(panel.members)
    n = len(panel.members)
    for i in range(n):
        for j in range(i + 1, n):
            if dist[i, j] < cfg.tau:
                out.append(f"members {panel.members[i].id},{panel.members[j].id} closer than tau")
    if abs(panel.utility - panel_utility(panel.members, cfg, ctx)) > 1e-9:
        out.append("stored utility differs from recomputed utility")
    return out


def feasible_family_nonempty(
    pool: Sequence[Candidate],
    cfg: SearchConfig,
    parents: Optional[Mapping[int, Candidate]] = None,
) -> bool:
    """Whether some feasible, pairwise tau-diverse N-subset exists.

    Exact clique search up to ``cfg.exact_cap`` feasible members; above that a
    greedy witness, so ``False`` may be a false negative there.
    """
    feas = sorted(_feasible_members(pool, cfg, parents), key=lambda m: m.id)
    if len(feas) < cfg.N:
        return False
    compat = distance_matrix(feas) >= cfg.tau
    if len(feas) <= cfg.exact_cap:
        return has_clique(compat, cfg.N)
    chosen: list[int] = []
    for i in range(len(feas)):
        if all(compat[i, j] for j in chosen):
            chosen.append(i)
            if len(chosen) == cfg.N:
                return True
    return False


def build_panel_exact(
    pool: Sequence[Candidate],
    cfg: SearchConfig,
    ctx: TaskContext,
    source_iteration: int = 0,
    parents: Optional[Mapping[int, Candidate]] = None,
) -> Panel:
    """Utility-maximising feasible tau-diverse N-subset by branch and bound."""
    if len(pool) > cfg.exact_cap:
        raise ValueError(f"pool of {len(pool)} exceeds exact solver cap {cfg.exact_cap}; use greedy")
    feas = _feasible_members(pool, cfg, parents)
    if len(feas) < cfg.N:
        return Panel(source_iteration=source_iteration)
    values = np.array([member_value(m, cfg, ctx) for m in feas])
    order = sorted(range(len(feas)), key=lambda i: (-values[i], feas[i].id))
    feas = [feas[i] for i in order]
    values = values[order]
    dist = distance_matrix(feas)
    n = cfg.N
    c_div = cfg.eta_div * 2.0 / (n * (n - 1))
    off = dist[np.triu_indices(len(feas), 1)]
    dbound = off.max() if c_div >= 0 else off.min()
    ids = np.array([m.id for m in feas], dtype=np.int64)
    idx, _ = best_subset(values, dist, cfg.tau, n, ids, c_div, dbound)
    if idx[0] < 0:
        return Panel(source_iteration=source_iteration)
    return make_panel([feas[i] for i in idx], cfg, ctx, source_iteration)


def build_panel_greedy(
    pool: Sequence[Candidate],
    cfg: SearchConfig,
    ctx: TaskContext,
    source_iteration: int = 0,
    parents: Optional[Mapping[int, Candidate]] = None,
) -> Panel:
    feas = sorted(_feasible_members(pool, cfg, parents), key=lambda m: m.id)
    if len(feas) < cfg.N:
        return Panel(source_iteration=source_iteration)
    dist = distance_matrix(feas)
    values = [member_value(m, cfg, ctx) for m in feas]

    def seed_score(m):
        aff = m.stage_affinity(cfg.S)
        return cfg.eta_aff * balance_affinity(aff[0], aff[1], ctx) + cfg.eta_chem * chemistry_score(m)

    first = max(range(len(feas)), key=lambda i: (seed_score(feas[i]), -feas[i].id))
    chosen = [first]
    vsum = values[first]
    dsum = 0.0
    while len(chosen) < cfg.N:
        k = len(chosen)
        best, best_j = None, -math.inf
        for i in range(len(feas)):
            if i in chosen or any(dist[i, j] < cfg.tau for j in chosen):
                continue
            add = sum(dist[i, j] for j in chosen)
            j_val = (vsum + values[i]) / (k + 1) + cfg.eta_div * (dsum + add) / ((k + 1) * k / 2.0)
            if j_val > best_j:
                best, best_j = i, j_val
        if best is None:
            return Panel(source_iteration=source_iteration)
        dsum += sum(dist[best, j] for j in chosen)
        vsum += values[best]
        chosen.append(best)
    return make_panel([feas[i] for i in chosen], cfg, ctx, source_iteration)


def build_panel(
    pool: Sequence[Candidate],
    cfg: SearchConfig,
    ctx: TaskContext,
    source_iteration: int = 0,
    parents: Optional[Mapping[int, Candidate]] = None,
) -> Panel:
    """Exact search when the pool fits under the cap, greedy otherwise."""
    if len(pool) <= cfg.exact_cap:
        return build_panel_exact(pool, cfg, ctx, source_iteration, parents)
    return build_panel_greedy(pool, cfg, ctx, source_iteration, parents)


def update_incumbent(current: Panel, challenger: Panel) -> Panel:
    if challenger.utility > current.utility:
        return challenger
    return current

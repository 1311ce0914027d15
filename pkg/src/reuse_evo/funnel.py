"""Stage-wise feasibility-first environmental selection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .core import Candidate, ConfigError, EvaluatorStage, SearchConfig, TaskContext, derive_seed
from .evaluators import CostLedger, evaluate_stage
from .scoring import ScoredCandidate, score_pool


@dataclass(frozen=True)
class StagePool:
    """Survivors after stage ``stage_index`` (stage 0 is the pooled offspring).

    ``scores`` and ``evaluated`` cover every member of the incoming pool, so
    eliminated candidates stay visible to the trace.
    """

    stage_index: int
    members: tuple[Candidate, ...]
    budget: Optional[int] = None
    scores: Mapping[int, ScoredCandidate] = field(default_factory=dict)
    evaluated: tuple[Candidate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(sorted(self.members, key=lambda c: c.id)))

    def __len__(self) -> int:
        return len(self.members)

    @property
    def ids(self) -> list[int]:
        return [c.id for c in self.members]


def pool_offspring(families: Sequence[Sequence[Candidate]]) -> StagePool:
    members = [c for fam in families for c in fam]
    if len({c.id for c in members}) != len(members):
        raise ValueError("candidate ids must be unique across families")
    return StagePool(stage_index=0, members=tuple(members))


def run_stage(
    pool: StagePool,
    stage: EvaluatorStage,
    cfg: SearchConfig,
    ctx: TaskContext,
    rng_seed: int = 0,
    ledger: Optional[CostLedger] = None,
    parents: Optional[Mapping[int, Candidate]] = None,
) -> StagePool:
    if pool.stage_index != stage.stage_index - 1:
        raise ConfigError(
            f"stage {stage.stage_index} expects a stage-{stage.stage_index - 1} pool, got {pool.stage_index}"
        )
    budget = cfg.stage_budgets[stage.stage_index - 1]
    if ledger is not None:
        ledger.charge_stage(stage, len(pool))
    evaluated = [evaluate_stage(m, stage, rng_seed) for m in pool.members]
    scored = score_pool(evaluated, stage.stage_index, cfg, ctx, parents)
    order = sorted(range(len(evaluated)), key=lambda i: scored[i].key)
    survivors = [evaluated[i] for i in order[:budget]]
    return StagePool(
        stage_index=stage.stage_index,
        members=tuple(survivors),
        budget=budget,
        scores={s.candidate_id: s for s in scored},
        evaluated=tuple(evaluated),
    )


def run_funnel(
    pool0: StagePool,
    cfg: SearchConfig,
    ctx: TaskContext,
    rng_seed: int = 0,
    ledger: Optional[CostLedger] = None,
    parents: Optional[Mapping[int, Candidate]] = None,
) -> list[StagePool]:
    """Apply every configured stage; returns ``[C0, C1, ..., CS]``."""
    pools = [pool0]
    for stage in cfg.funnel:
        seed = derive_seed(rng_seed, "stage", stage.stage_index)
        pools.append(run_stage(pools[-1], stage, cfg, ctx, seed, ledger, parents))
    return pools

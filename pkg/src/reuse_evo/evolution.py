"""Population-based search over the generator's input space."""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Candidate, ConfigError, LatentPoint, SearchConfig, TaskContext, derive_seed, stream
from .evaluators import CostLedger
from .funnel import StagePool, pool_offspring, run_funnel
from .generator import decode_family, prior_draw, sample_prior
from .panel import EMPTY_PANEL, Panel, build_panel, update_incumbent
from .scoring import evaluate_family, rank_scored
from .trace import TraceRecord, encode_utility

OPERATORS = ("mutation", "crossover", "immigration")


@dataclass(frozen=True)
class Population:
    members: tuple[tuple[LatentPoint, float], ...]
    generation: int = 0

    def __len__(self) -> int:
        return len(self.members)

    @property
    def best_fitness(self) -> float:
        return max(f for _, f in self.members)


def _fitness_order(pairs):
    return sorted(pairs, key=lambda p: (-p[1], p[0].id))


def select_parents(pop: Population, cfg: SearchConfig) -> list[LatentPoint]:
    if len(pop) < cfg.B_par:
        raise ConfigError(f"population of {len(pop)} is smaller than B_par={cfg.B_par}")
    return [z for z, _ in _fitness_order(pop.members)[: cfg.B_par]]


def mutation_scale(generation: int, cfg: SearchConfig) -> float:
    return cfg.sigma_mut * cfg.gamma_mut**generation


def mutate(
    z: LatentPoint,
    generation: int,
    cfg: SearchConfig,
    rng_seed: int,
    new_id: int = 0,
    birth_iteration: int = 0,
) -> LatentPoint:
    rng = stream(rng_seed, "mutate")
    eps = rng.standard_normal(z.dim) * mutation_scale(generation, cfg)
    return LatentPoint(z.coords + eps, new_id, birth_iteration, "mutation", (z.id,))


def crossover(
    z_i: LatentPoint,
    z_j: LatentPoint,
    rng_seed: int,
    new_id: int = 0,
    birth_iteration: int = 0,
    lam: Optional[float] = None,
) -> LatentPoint:
    """Convex blend ``lam * z_i + (1 - lam) * z_j`` with ``lam ~ U(0, 1)`` unless given."""
    if z_i.dim != z_j.dim:
        raise ValueError(f"crossover of latents with dimensions {z_i.dim} and {z_j.dim}")
    if lam is None:
        lam = stream(rng_seed, "crossover").random()
    coords = lam * z_i.coords + (1.0 - lam) * z_j.coords
    # keep the result inside the coordinate box despite rounding
    lo = np.minimum(z_i.coords, z_j.coords)
    hi = np.maximum(z_i.coords, z_j.coords)
    return LatentPoint(np.clip(coords, lo, hi), new_id, birth_iteration, "crossover", (z_i.id, z_j.id))


def draw_operator(rng: np.random.Generator, cfg: SearchConfig) -> str:
    u = rng.random()
    if u < cfg.alpha_mut:
        return "mutation"
    if u < cfg.alpha_mut + cfg.alpha_cross:
        return "crossover"
    return "immigration"


def spawn_offspring(
    parents: Sequence[LatentPoint],
    generation: int,
    ctx: TaskContext,
    cfg: SearchConfig,
    rng_seed: int,
    first_id: int = 0,
    birth_iteration: int = 0,
) -> list[LatentPoint]:
    """``B_off`` offspring, each from an operator drawn from the mixture.

    With a single parent, crossover mass falls to mutation.
    """
    if not parents:
        raise ConfigError("spawn_offspring needs at least one parent")
    out = []
    for i in range(cfg.B_off):
        rng = stream(rng_seed, "offspring", i)
        op = draw_operator(rng, cfg)
        new_id = first_id + i
        child_seed = derive_seed(rng_seed, "child", i)
        if op == "crossover" and len(parents) < 2:
            op = "mutation"
        if op == "mutation":
            parent = parents[rng.integers(len(parents))]
            out.append(mutate(parent, generation, cfg, child_seed, new_id, birth_iteration))
        elif op == "crossover":
            a, b = rng.choice(len(parents), size=2, replace=False)
            out.append(crossover(parents[a], parents[b], child_seed, new_id, birth_iteration))
        else:
            coords = prior_draw(ctx.prior, stream(child_seed, "immigration"), ctx.dim)
            out.append(LatentPoint(coords, new_id, birth_iteration, "immigration"))
    return out


def update_population(
    pop: Population,
    offspring: Sequence[tuple[LatentPoint, float]],
    cfg: SearchConfig,
) -> Population:
    """Elitist survival: the ``B`` fittest of parents and offspring."""
    merged = _fitness_order(list(pop.members) + list(offspring))
    return Population(tuple(merged[: cfg.B]), pop.generation + 1)


# ---------------------------------------------------------------------------
# Driver


@dataclass
class RunResult:
    incumbent: Panel
    trace: list[TraceRecord]
    header: dict
    total_cost: float
    wall_clock: float
    config: SearchConfig
    seed: int
    panels: list[Panel] = field(default_factory=list)
    pools: list[list[StagePool]] = field(default_factory=list)

    @property
    def incumbent_utility(self) -> float:
        return self.incumbent.utility


@dataclass
class _Evaluated:
    latent: LatentPoint
    fitness: float
    representative: Candidate
    chem_ok: bool
    family: list[Candidate]
    fitness_first_id: int


def _evaluate_latent(z, ctx, cfg, root_seed, fitness_first_id, family_first_id, decode_family_too):
    fitness, fam, scored = evaluate_family(z, ctx, cfg, derive_seed(root_seed, "fitness", z.id), fitness_first_id)
    best_id = rank_scored(scored)[0].candidate_id
    rep = next(m for m in fam if m.id == best_id)
    chem_ok = any(m.qed_like >= cfg.qed_floor and m.sa_like >= cfg.sa_floor for m in fam)
    decoded = []
    if decode_family_too:
        decoded = decode_family(z, ctx, cfg.family_size, derive_seed(root_seed, "family", z.id), family_first_id)
    return _Evaluated(z, fitness, rep, chem_ok, decoded, fitness_first_id)


def _latent_record(ev: _Evaluated) -> dict:
    z = ev.latent
    return {
        "id": z.id,
        "operator": z.operator,
        "parents": list(z.parents),
        "birth_iteration": z.birth_iteration,
        "coords": [float(x) for x in z.coords],
        "fitness": float(ev.fitness),
        "chem_ok": bool(ev.chem_ok),
        "fitness_first_id": ev.fitness_first_id,
    }


def _candidate_records(pools: Sequence[StagePool]) -> list[dict]:
    seen = [{c.id: c for c in p.evaluated} for p in pools[1:]]
    out = []
    for c in pools[0].members:
        stages = {}
        for p, evaluated in zip(pools[1:], seen):
            sc = p.scores.get(c.id)
            if sc is None:
                continue
            entry = {
                "feasible": sc.feasible,
                "h": encode_utility(sc.h),
                "f_aff": encode_utility(sc.f_aff),
                "reasons": list(sc.reasons),
            }
            entry["a"], entry["b"] = evaluated[c.id].stage_affinity(p.stage_index)
            stages[str(p.stage_index)] = entry
        out.append(
            {
                "id": c.id,
                "origin": c.origin_latent,
                "valid": c.valid,
                "qed": c.qed_like,
                "sa": c.sa_like,
                "features": f"{c.features:016x}",
                "latent": [float(x) for x in c.latent],
                "stages": stages,
            }
        )
    return out


def run_search(
    ctx: TaskContext,
    cfg: SearchConfig,
    workers: int = 1,
    keep_pools: bool = False,
    record_candidates: bool = True,
) -> RunResult:
    """Run the full search loop and return the incumbent panel with its trace."""
    from .config_io import config_to_dict, funnel_to_list, task_to_dict

    if ctx.dim != cfg.d_z:
        raise ConfigError(f"task dimension {ctx.dim} does not match d_z={cfg.d_z}")
    t0 = time.perf_counter()
    seed = cfg.seed
    latent_ids = itertools.count()
    cand_ids = itertools.count()
    ledger = CostLedger()
    fit_stage = cfg.funnel[0]

    def evaluate_all(latents, decode_too):
        jobs = []
        for z in latents:
            fid = next(cand_ids)
            for _ in range(cfg.M_eval - 1):
                next(cand_ids)
            did = None
            if decode_too:
                did = next(cand_ids)
                for _ in range(cfg.family_size - 1):
                    next(cand_ids)
            jobs.append((z, fid, did))
        ledger.fitness += fit_stage.cost_units * cfg.M_eval * len(latents)

        def job(args):
            z, fid, did = args
            return _evaluate_latent(z, ctx, cfg, seed, fid, did, decode_too)

        if workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                return list(ex.map(job, jobs))
        return [job(j) for j in jobs]

    init = sample_prior(ctx.prior, derive_seed(seed, "init"), cfg.B, cfg.d_z, first_id=next(latent_ids))
    for _ in range(cfg.B - 1):
        next(latent_ids)
    init_eval = evaluate_all(init, decode_too=False)
    pop = Population(tuple((e.latent, e.fitness) for e in init_eval), 0)
    reps = {e.latent.id: e.representative for e in init_eval}

    header = {
        "record": "run",
        "schema_version": 1,
        "seed": seed,
        "config": config_to_dict(cfg),
        "funnel": funnel_to_list(cfg),
        "task": task_to_dict(ctx),
        "initial_population": [_latent_record(e) for e in init_eval],
    }

    incumbent = EMPTY_PANEL
    trace: list[TraceRecord] = []
    panels: list[Panel] = []
    all_pools: list[list[StagePool]] = []
    for t in range(1, cfg.T + 1):
        parents = select_parents(pop, cfg)
        first = next(latent_ids)
        for _ in range(cfg.B_off - 1):
            next(latent_ids)
        offspring = spawn_offspring(parents, pop.generation, ctx, cfg, derive_seed(seed, "spawn", t), first, t)
        evals = evaluate_all(offspring, decode_too=True)

        parent_of: dict[int, Candidate] = {}
        for e in evals:
            if e.latent.operator == "mutation":
                rep = reps[e.latent.parents[0]]
                for m in e.family:
                    parent_of[m.id] = rep
        for e in evals:
            reps[e.latent.id] = e.representative

        funnel_before = ledger.funnel
        stage_before = dict(ledger.per_stage)
        pool0 = pool_offspring([e.family for e in evals])
        pools = run_funnel(pool0, cfg, ctx, derive_seed(seed, "funnel", t), ledger, parent_of)
        panel = build_panel(list(pools[-1].members), cfg, ctx, t, parent_of)
        pop = update_population(pop, [(e.latent, e.fitness) for e in evals], cfg)
        incumbent = update_incumbent(incumbent, panel)

        trace.append(
            TraceRecord(
                iteration=t,
                parents=[z.id for z in parents],
                offspring=[_latent_record(e) for e in evals],
                pool_sizes=[len(p) for p in pools],
                pools=[p.ids for p in pools],
                stage_cost=[
                    ledger.per_stage.get(s.stage_index, 0.0) - stage_before.get(s.stage_index, 0.0)
                    for s in cfg.funnel
                ],
                funnel_cost=ledger.funnel - funnel_before,
                fitness_cost=fit_stage.cost_units * cfg.M_eval * len(offspring),
                panel_ids=panel.ids,
                panel_utility=panel.utility,
                incumbent_ids=incumbent.ids,
                incumbent_utility=incumbent.utility,
                population=[{"id": z.id, "fitness": float(f)} for z, f in pop.members],
                candidates=_candidate_records(pools) if record_candidates else [],
            )
        )
        panels.append(panel)
        if keep_pools:
            all_pools.append(pools)

    return RunResult(
        incumbent=incumbent,
        trace=trace,
        header=header,
        total_cost=ledger.total,
        wall_clock=time.perf_counter() - t0,
        config=cfg,
        seed=seed,
        panels=panels,
        pools=all_pools,
    )

"""Property suites: each check prints one PASS/FAIL line."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .core import Candidate, PriorSpec, SearchConfig, default_config, stream
from .evaluators import CostLedger, distance_matrix, feasibility
from .funnel import pool_offspring, run_funnel
from .generator import default_task
from .panel import build_panel_exact, panel_violations
from .scoring import panel_utility

SUITES = ("theorems", "funnel", "panel", "hitting")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}" + (f": {self.detail}" if self.detail else "")


# ---------------------------------------------------------------------------
# Synthetic pools


def clustered_fingerprints(rng: np.random.Generator, count: int, clusters: int = 3, max_flips: int = 8) -> list[int]:
    """Fingerprints scattered around a few random centres, so some pairs are near-duplicates."""
    centres = [int(rng.integers(0, 2**64, dtype=np.uint64)) for _ in range(clusters)]
    out = []
    for _ in range(count):
        fp = centres[int(rng.integers(clusters))]
        for bit in rng.choice(64, size=int(rng.integers(0, max_flips + 1)), replace=False):
            fp ^= 1 << int(bit)
        out.append(fp)
    return out


def synthetic_candidate(
    ident: int,
    fp: int,
    base: tuple[float, float],
    qed: float,
    sa: float,
    valid: bool = True,
    stages: Sequence[tuple[float, float]] = (),
    dim: int = 2,
) -> Candidate:
    """Candidate with explicit stage affinities ``stages[s-1]`` for stage ``s``."""
    aff = {}
    for s, (a, b) in enumerate(stages, start=1):
        aff[(s, "a")] = float(a)
        aff[(s, "b")] = float(b)
    return Candidate(ident, 0, fp, np.zeros(dim), base, qed, sa, valid, aff)


def random_terminal_pool(rng: np.random.Generator, size: int, S: int = 2, infeasible_share: float = 0.2) -> list[Candidate]:
    fps = clustered_fingerprints(rng, size)
    out = []
    for i in range(size):
        bad = rng.random() < infeasible_share
        qed = float(rng.uniform(0.0, 0.49)) if bad else float(rng.uniform(0.5, 1.0))
        stages = [tuple(rng.normal(4.0, 2.0, size=2)) for _ in range(S)]
        out.append(synthetic_candidate(i, fps[i], stages[-1], qed, float(rng.uniform(0.5, 1.0)), True, stages))
    return out


def brute_force_panel(pool: Sequence[Candidate], cfg: SearchConfig, ctx) -> tuple[float, tuple[int, ...]]:
    """Best utility over all feasible tau-diverse N-subsets by enumeration."""
    feas = sorted((m for m in pool if feasibility(m, cfg, cfg.S).feasible), key=lambda m: m.id)
    dist = distance_matrix(feas)
    best, best_ids = -math.inf, ()
    for combo in itertools.combinations(range(len(feas)), cfg.N):
        if any(dist[i, j] < cfg.tau for i, j in itertools.combinations(combo, 2)):
            continue
        members = [feas[i] for i in combo]
        u = panel_utility(members, cfg, ctx)
        if u > best:
            best, best_ids = u, tuple(m.id for m in members)
    return best, best_ids


# ---------------------------------------------------------------------------
# Suites


def _run_many(runs: int, cfg: SearchConfig, ctx, workers: int = 1):
    from .evolution import run_search

    for seed in range(runs):
        yield run_search(ctx, replace(cfg, seed=seed), workers=workers, keep_pools=True)


def suite_theorems(runs: int = 100, workers: int = 1) -> list[CheckResult]:
    """Monotonicity, nestedness, budget, cost and panel constraints over seeded runs."""
    cfg, ctx = default_config(), default_task()
    bad = {k: 0 for k in ("monotone", "nested", "budget", "cost", "feasibility_first", "panel", "incumbent", "length")}
    for res in _run_many(runs, cfg, ctx, workers):
        utils = [r.incumbent_utility for r in res.trace]
        bad["monotone"] += sum(b < a for a, b in zip(utils, utils[1:]))
        bad["length"] += len(res.trace) != cfg.T
        best = max((p.utility for p in res.panels), default=-math.inf)
        bad["incumbent"] += res.incumbent.utility != best
        for rec, pools in zip(res.trace, res.pools):
            for s in range(1, len(rec.pools)):
                prev, cur = set(rec.pools[s - 1]), set(rec.pools[s])
                bad["nested"] += not cur <= prev
                bad["budget"] += len(cur) != min(len(prev), cfg.stage_budgets[s - 1])
            expected = sum(st.cost_units * len(rec.pools[st.stage_index - 1]) for st in cfg.funnel)
            bad["cost"] += abs(rec.funnel_cost - expected) > 1e-9
            bad["feasibility_first"] += feasibility_first_violations(pools)
            by_id = {c["id"]: c for c in rec.candidates}
            for pid in rec.panel_ids:
                bad["panel"] += not by_id[pid]["stages"][str(cfg.S)]["feasible"]
        for panel in [*res.panels, res.incumbent]:
            if not panel.empty:
                bad["panel"] += len(panel_violations(panel, cfg, ctx))
    names = {
        "monotone": "incumbent utility non-decreasing",
        "nested": "stage pools nested",
        "budget": "stage pool size equals min(previous, budget)",
        "cost": "charged funnel cost matches pool sizes",
        "feasibility_first": "no feasible candidate dropped while an infeasible one survives",
        "panel": "panels have N feasible tau-diverse members",
        "incumbent": "incumbent utility equals best panel utility",
        "length": "trace length equals T",
    }
    return [CheckResult(names[k], v == 0, f"{v} violations over {runs} runs") for k, v in bad.items()]


def adversarial_pool(rng: np.random.Generator, size: int) -> list[Candidate]:
    """Feasible low-affinity candidates mixed with infeasible high-affinity ones."""
    fps = clustered_fingerprints(rng, size, clusters=6)
    out = []
    for i in range(size):
        if rng.random() < 0.5:
            base = tuple(rng.uniform(0.0, 1.0, size=2))
            out.append(synthetic_candidate(i, fps[i], base, float(rng.uniform(0.5, 1)), float(rng.uniform(0.5, 1))))
        else:
            base = tuple(rng.uniform(5.0, 10.0, size=2))
            kind = rng.integers(3)
            qed = float(rng.uniform(0, 0.49)) if kind == 0 else float(rng.uniform(0.5, 1))
            sa = float(rng.uniform(0, 0.49)) if kind == 1 else float(rng.uniform(0.5, 1))
            out.append(synthetic_candidate(i, fps[i], base, qed, sa, valid=kind != 2))
    return out


def feasibility_first_violations(pools) -> int:
    bad = 0
    for s in range(1, len(pools)):
        kept = set(pools[s].ids)
        sc = pools[s].scores
        if any(sc[i].feasible for i in sc if i not in kept) and any(not sc[i].feasible for i in kept):
            bad += 1
    return bad


def witness_pool(rng: np.random.Generator, cfg: SearchConfig) -> tuple[list[Candidate], int]:
    """Pool whose marked candidate has fewer than ``min(B_s)`` strict dominators.

    Dominators sit far above the marked candidate, the rest far below, and
    infeasible candidates with large affinities cannot dominate.
    """
    size = int(rng.integers(max(cfg.stage_budgets) + 1, 3 * max(cfg.stage_budgets)))
    fps = clustered_fingerprints(rng, size, clusters=8)
    n_dom = int(rng.integers(0, min(cfg.stage_budgets)))
    marked = int(rng.integers(size))
    ids = [i for i in range(size) if i != marked]
    rng.shuffle(ids)
    dominators = set(ids[:n_dom])
    out = []
    for i in range(size):
        ok = (float(rng.uniform(0.5, 1)), float(rng.uniform(0.5, 1)))
        if i == marked:
            out.append(synthetic_candidate(i, fps[i], (50.0, 50.0), *ok))
        elif i in dominators:
            out.append(synthetic_candidate(i, fps[i], tuple(rng.uniform(200, 300, size=2)), *ok))
        elif rng.random() < 0.3:
            out.append(synthetic_candidate(i, fps[i], tuple(rng.uniform(200, 300, size=2)), 0.2, ok[1]))
        else:
            out.append(synthetic_candidate(i, fps[i], tuple(rng.uniform(-100, -50, size=2)), *ok))
    return out, marked


def strict_dominators(scored, marked: int) -> int:
    key = next(s.key for s in scored if s.candidate_id == marked)
    return sum(s.key < key for s in scored if s.candidate_id != marked)


def suite_funnel(runs: int = 500) -> list[CheckResult]:
    cfg, ctx = default_config(), default_task()
    bad = 0
    for r in range(runs):
        rng = stream(r, "verify-funnel")
        pool0 = pool_offspring([adversarial_pool(rng, int(rng.integers(20, 120)))])
        bad += feasibility_first_violations(run_funnel(pool0, cfg, ctx, rng_seed=r))
    out = [CheckResult("feasibility-first selection on adversarial pools", bad == 0, f"{bad} violations over {runs} pools")]

    cases = min(runs, 100)
    survived = premise_ok = 0
    for r in range(cases):
        rng = stream(r, "verify-witness")
        pool, marked = witness_pool(rng, cfg)
        pools = run_funnel(pool_offspring([pool]), cfg, ctx, rng_seed=r)
        premise = all(
            strict_dominators(list(p.scores.values()), marked) <= cfg.stage_budgets[p.stage_index - 1] - 1
            for p in pools[1:]
            if marked in p.scores
        )
        premise_ok += premise
        survived += marked in pools[-1].ids
    out.append(CheckResult("witness premise holds on constructed pools", premise_ok == cases, f"{premise_ok}/{cases}"))
    out.append(CheckResult("witness reaches the terminal pool", survived == cases, f"{survived}/{cases}"))
    ledger = CostLedger()
    rng = stream(0, "verify-cost")
    pools = run_funnel(pool_offspring([adversarial_pool(rng, 60)]), cfg, ctx, ledger=ledger)
    expected = sum(st.cost_units * len(pools[st.stage_index - 1]) for st in cfg.funnel)
    out.append(CheckResult("funnel cost equals sum of stage costs", abs(ledger.funnel - expected) < 1e-9, f"{ledger.funnel}"))
    return out


def suite_panel(runs: int = 200) -> list[CheckResult]:
    cfg = default_config(N=3)
    ctx = default_task()
    mismatches = 0
    for r in range(runs):
        rng = stream(r, "verify-panel")
        pool = random_terminal_pool(rng, int(rng.integers(3, 16)))
        exact = build_panel_exact(pool, cfg, ctx)
        best, _ = brute_force_panel(pool, cfg, ctx)
        if exact.empty != (best == -math.inf) or (not exact.empty and abs(exact.utility - best) > 1e-9):
            mismatches += 1
    return [CheckResult("exact panel equals brute-force optimum", mismatches == 0, f"{mismatches} mismatches over {runs} pools")]


def half_space(z) -> bool:
    return z.coords[0] >= 0.0


def suite_hitting(runs: int = 2000, workers: int = 1) -> list[CheckResult]:
    from .analysis import binomial_margin, hitting_probability_experiment

    cfg = default_config()
    ctx = default_task(prior=PriorSpec(mode="gaussian", sigma=1.0))
    emp, bound = hitting_probability_experiment(half_space, ctx, cfg, runs=runs, q=0.5, workers=workers)
    margin = binomial_margin(bound, runs)
    return [
        CheckResult(
            "hitting rate meets the immigration bound",
            emp >= bound - margin,
            f"empirical {emp:.4f}, bound {bound:.4f}, margin {margin:.4f}",
        )
    ]


def run_suite(name: str, runs: Optional[int] = None, workers: int = 1, echo: Callable[[str], None] = print) -> bool:
    if name not in SUITES:
        raise KeyError(name)
    if name == "theorems":
        results = suite_theorems(runs or 100, workers)
    elif name == "funnel":
        results = suite_funnel(runs or 500)
    elif name == "panel":
        results = suite_panel(runs or 200)
    else:
        results = suite_hitting(runs or 2000, workers)
    for r in results:
        echo(r.line())
    return all(r.passed for r in results)

"""Acceptance criteria 1-12.

Each test records one PASS/FAIL line; the lines are printed in the pytest
terminal summary (see conftest) and when the module is run as a script.
Oracles here are written independently of the library's own checks.
"""

import itertools
import math
import statistics
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import binomtest

from reuse_evo.analysis import budget_curve, local_consistency, rank_agreement
from reuse_evo.cli import main as cli_main
from reuse_evo.core import Candidate, LatentPoint, PriorSpec, default_config, stream
from reuse_evo.evolution import run_search, spawn_offspring
from reuse_evo.funnel import pool_offspring, run_funnel
from reuse_evo.generator import default_task
from reuse_evo.panel import build_panel_exact

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"ACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}: {detail}"
    print(RESULTS[n])
    assert ok, RESULTS[n]


def tanimoto(x: int, y: int) -> float:
    union = bin(x | y).count("1")
    return 0.0 if union == 0 else 1.0 - bin(x & y).count("1") / union


def feasible_final(m: Candidate, cfg) -> bool:
    aff = m.stage_affinity(cfg.S)
    return (
        m.valid
        and m.qed_like >= cfg.qed_floor
        and m.sa_like >= cfg.sa_floor
        and aff is not None
        and all(math.isfinite(v) for v in aff)
    )


@pytest.fixture(scope="module")
def hundred_runs():
    cfg, ctx = default_config(), default_task()
    t0 = time.perf_counter()
    runs = [run_search(ctx, replace(cfg, seed=s), keep_pools=True) for s in range(100)]
    return runs, time.perf_counter() - t0


# ---------------------------------------------------------------------------


def test_criterion_01_incumbent_monotonicity(hundred_runs):
    runs, elapsed = hundred_runs
    bad = 0
    for res in runs:
        u = [r.incumbent_utility for r in res.trace]
        bad += sum(b < a for a, b in zip(u, u[1:]))
    record(1, bad == 0 and elapsed < 60, f"{bad} violations over {len(runs)} runs in {elapsed:.1f}s (limit 60s)")


def test_criterion_02_nestedness_and_budgets(hundred_runs):
    runs, _ = hundred_runs
    cfg = default_config()
    nested = size = 0
    for res in runs:
        for rec in res.trace:
            for s in range(1, len(rec.pools)):
                prev, cur = rec.pools[s - 1], rec.pools[s]
                nested += not set(cur) <= set(prev)
                size += len(cur) != min(len(prev), cfg.stage_budgets[s - 1])
    record(2, nested + size == 0, f"{nested} nestedness and {size} budget violations")


def test_criterion_03_constraint_preservation(hundred_runs):
    runs, _ = hundred_runs
    cfg = default_config()
    bad = checked = 0
    for res in runs:
        flags = {}
        for rec in res.trace:
            for c in rec.candidates:
                st = c["stages"].get(str(cfg.S))
                if st is not None:
                    flags[c["id"]] = st["feasible"]
        for panel in [*res.panels, res.incumbent]:
            if panel.empty:
                continue
            checked += 1
            ms = panel.members
            ok = len(ms) == cfg.N
            ok &= all(feasible_final(m, cfg) and flags[m.id] for m in ms)
            ok &= all(tanimoto(a.features, b.features) >= cfg.tau for a, b in itertools.combinations(ms, 2))
            bad += not ok
    record(3, bad == 0 and checked > 0, f"{bad} violations over {checked} nonempty panels and incumbents")


def _random_pool(rng, size):
    centres = [int(rng.integers(0, 2**64, dtype=np.uint64)) for _ in range(3)]
    pool = []
    for i in range(size):
        fp = centres[int(rng.integers(3))]
        for b in rng.choice(64, size=int(rng.integers(0, 9)), replace=False):
            fp ^= 1 << int(b)
        a, bb = rng.normal(4.0, 2.0, size=2)
        qed = float(rng.uniform(0.0, 0.49)) if rng.random() < 0.2 else float(rng.uniform(0.5, 1.0))
        aff = {(2, "a"): float(a), (2, "b"): float(bb), (1, "a"): float(a), (1, "b"): float(bb)}
        pool.append(Candidate(i, 0, fp, np.zeros(2), (a, bb), qed, float(rng.uniform(0.5, 1.0)), True, aff))
    return pool


def _brute_force_j(pool, cfg, ctx):
    feas = [m for m in pool if feasible_final(m, cfg)]
    best = -math.inf
    for combo in itertools.combinations(feas, cfg.N):
        pairs = list(itertools.combinations(combo, 2))
        d = [tanimoto(x.features, y.features) for x, y in pairs]
        if min(d) < cfg.tau:
            continue
        vals = []
        for m in combo:
            a, b = m.stage_affinity(cfg.S)
            f = ctx.w_a * a + ctx.w_b * b - ctx.lambda_bal * abs(a - b)
            vals.append(cfg.eta_aff * f + cfg.eta_chem * (m.qed_like + m.sa_like) / 2 - cfg.beta_bal_subset * abs(a - b))
        best = max(best, sum(vals) / len(vals) + cfg.eta_div * sum(d) / len(d))
    return best


def test_criterion_04_exact_panel_oracle():
    cfg, ctx = default_config(N=3), default_task()
    t0 = time.perf_counter()
    mismatches = 0
    for s in range(200):
        rng = np.random.default_rng(10_000 + s)
        pool = _random_pool(rng, int(rng.integers(3, 16)))
        exact = build_panel_exact(pool, cfg, ctx)
        ref = _brute_force_j(pool, cfg, ctx)
        if ref == -math.inf:
            mismatches += not exact.empty
        else:
            mismatches += exact.empty or abs(exact.utility - ref) > 1e-9
    elapsed = time.perf_counter() - t0
    record(4, mismatches == 0 and elapsed < 30, f"{mismatches} mismatches over 200 pools in {elapsed:.1f}s (limit 30s)")


def _adversarial(rng, size):
    pool = []
    for i in range(size):
        fp = int(rng.integers(0, 2**64, dtype=np.uint64))
        if rng.random() < 0.5:
            base = tuple(rng.uniform(0.0, 1.0, size=2))
            pool.append(Candidate(i, 0, fp, np.zeros(2), base, float(rng.uniform(0.5, 1)), float(rng.uniform(0.5, 1))))
        else:
            base = tuple(rng.uniform(5.0, 10.0, size=2))
            kind = int(rng.integers(3))
            qed = float(rng.uniform(0, 0.49)) if kind == 0 else float(rng.uniform(0.5, 1))
            sa = float(rng.uniform(0, 0.49)) if kind == 1 else float(rng.uniform(0.5, 1))
            pool.append(Candidate(i, 0, fp, np.zeros(2), base, qed, sa, kind != 2))
    return pool


def test_criterion_05_feasibility_first():
    cfg, ctx = default_config(), default_task()
    bad = 0
    for s in range(500):
        rng = np.random.default_rng(20_000 + s)
        pools = run_funnel(pool_offspring([_adversarial(rng, int(rng.integers(20, 121)))]), cfg, ctx, rng_seed=s)
        for k in range(1, len(pools)):
            kept = set(pools[k].ids)
            incoming = pools[k].evaluated
            ok_in = {m.id: m.valid and m.qed_like >= cfg.qed_floor and m.sa_like >= cfg.sa_floor for m in incoming}
            lost_feasible = any(ok_in[i] for i in ok_in if i not in kept)
            kept_infeasible = any(not ok_in[i] for i in kept)
            bad += lost_feasible and kept_infeasible
    record(5, bad == 0, f"{bad} violations over 500 adversarial pools")


def _h(m, stage, pool, cfg, ctx):
    a, b = m.stage_affinity(stage)
    f = ctx.w_a * a + ctx.w_b * b - ctx.lambda_bal * abs(a - b)
    beta = cfg.beta_chem_rerank if stage == cfg.S and cfg.S > 1 else cfg.beta_chem_search
    q_div = min((tanimoto(m.features, o.features) for o in pool if o.id != m.id), default=0.0)
    return f + beta * (m.qed_like + m.sa_like) / 2 + cfg.beta_div_subset * q_div


def test_criterion_06_witness_survival():
    cfg, ctx = default_config(), default_task()
    survived = premise_failures = 0
    for s in range(100):
        rng = np.random.default_rng(30_000 + s)
        size = int(rng.integers(41, 120))
        marked = int(rng.integers(size))
        n_dom = int(rng.integers(0, min(cfg.stage_budgets)))
        others = [i for i in range(size) if i != marked]
        rng.shuffle(others)
        dom = set(others[:n_dom])
        pool = []
        for i in range(size):
            fp = int(rng.integers(0, 2**64, dtype=np.uint64))
            q, sa = float(rng.uniform(0.5, 1)), float(rng.uniform(0.5, 1))
            if i == marked:
                base = (50.0, 50.0)
            elif i in dom:
                base = tuple(rng.uniform(200, 300, size=2))
            elif rng.random() < 0.3:
                base, q = tuple(rng.uniform(200, 300, size=2)), 0.2
            else:
                base = tuple(rng.uniform(-100, -50, size=2))
            pool.append(Candidate(i, 0, fp, np.zeros(2), base, q, sa))
        pools = run_funnel(pool_offspring([pool]), cfg, ctx, rng_seed=s)
        # premise: at most B_s - 1 strict dominators (feasible, larger h) at every stage
        for k in range(1, len(pools)):
            incoming = pools[k].evaluated
            if marked not in {m.id for m in incoming}:
                continue
            hs = {m.id: _h(m, k, incoming, cfg, ctx) for m in incoming}
            feas = {m.id: m.qed_like >= cfg.qed_floor for m in incoming}
            n_strict = sum(feas[i] and hs[i] > hs[marked] for i in hs if i != marked)
            premise_failures += n_strict > cfg.stage_budgets[k - 1] - 1
        survived += marked in pools[-1].ids
    record(
        6,
        survived == 100 and premise_failures == 0,
        f"marked candidate reached the terminal pool in {survived}/100 pools ({premise_failures} premise failures)",
    )


@pytest.mark.slow
def test_criterion_07_hitting_probability():
    cfg = default_config()
    ctx = default_task(prior=PriorSpec(mode="gaussian", sigma=1.0))
    runs = 2000
    t0 = time.perf_counter()
    hits = 0
    for s in range(runs):
        res = run_search(ctx, replace(cfg, seed=s), record_candidates=False)
        hits += any(o["coords"][0] >= 0.0 for r in res.trace for o in r.offspring)
    elapsed = time.perf_counter() - t0
    n_total = cfg.B_off * cfg.T
    bound = 1 - (1 - cfg.alpha_imm * 0.5) ** n_total
    margin = 3 * math.sqrt(bound * (1 - bound) / runs)
    emp = hits / runs
    record(
        7,
        emp >= bound - margin and elapsed < 300,
        f"empirical {emp:.4f} >= bound {bound:.4f} - {margin:.4f} over {runs} runs in {elapsed:.1f}s (limit 300s)",
    )


def test_criterion_08_operator_frequencies():
    cfg, ctx = default_config(), default_task()
    parents = [LatentPoint(np.zeros(ctx.dim), i) for i in range(3)]
    counts = {"mutation": 0, "crossover": 0, "immigration": 0}
    draws = 0
    for s in range(2500):
        for z in spawn_offspring(parents, 0, ctx, cfg, s, first_id=100):
            counts[z.operator] += 1
            draws += 1
    freq = tuple(counts[k] / draws for k in ("mutation", "crossover", "immigration"))
    ok = draws == 10_000 and all(abs(f - t) <= 0.02 for f, t in zip(freq, (0.40, 0.35, 0.25)))
    record(8, ok, f"frequencies {tuple(round(f, 4) for f in freq)} from {draws} draws vs (0.40, 0.35, 0.25)")


@pytest.mark.slow
def test_criterion_09_search_vs_ablation():
    cfg, ctx = default_config(), default_task()
    ablated = default_config(alpha_mut=0.0, alpha_cross=0.0, alpha_imm=1.0)
    full_j, abl_j = [], []
    for s in range(50):
        full_j.append(run_search(ctx, replace(cfg, seed=s), record_candidates=False).incumbent.utility)
        abl_j.append(run_search(ctx, replace(ablated, seed=s), record_candidates=False).incumbent.utility)
    wins = sum(f > a for f, a in zip(full_j, abl_j))
    losses = sum(f < a for f, a in zip(full_j, abl_j))
    p = binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue
    m_full, m_abl = statistics.median(full_j), statistics.median(abl_j)
    record(
        9,
        m_full > m_abl and p < 0.01,
        f"median J {m_full:.3f} vs {m_abl:.3f}, sign test {wins}-{losses}, one-sided p={p:.2e}",
    )


def test_criterion_10_budget_shape(hundred_runs):
    runs, _ = hundred_runs
    budgets = list(range(1, 13))
    bad_best = 0
    reached = np.zeros(len(budgets))
    for res in runs:
        curve = budget_curve(res.trace, budgets)
        best = [b for b, _ in curve]
        bad_best += any(y < x for x, y in zip(best, best[1:]))
        reached += [r for _, r in curve]
    rate = reached / len(runs)
    bad_rate = int(np.sum(np.diff(rate) < 0))
    record(
        10,
        bad_best == 0 and bad_rate == 0,
        f"{bad_best} runs with decreasing best-so-far, {bad_rate} drops in recovery rate "
        f"({rate[0]:.2f} -> {rate[-1]:.2f})",
    )


def _avg_ranks(x):
    n = len(x)
    return [1 + sum(x[j] < x[i] for j in range(n)) + 0.5 * sum(x[j] == x[i] for j in range(n) if j != i) for i in range(n)]


def _pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    num = sum((a - mx) * (b - my) for a, b in zip(x, y))
    return num / math.sqrt(sum((a - mx) ** 2 for a in x) * sum((b - my) ** 2 for b in y))


def _kendall_b(x, y):
    n = len(x)
    c = d = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy = x[i] - x[j], y[i] - y[j]
            tx += dx == 0
            ty += dy == 0
            if dx * dy > 0:
                c += 1
            elif dx * dy < 0:
                d += 1
    n0 = n * (n - 1) / 2
    return (c - d) / math.sqrt((n0 - tx) * (n0 - ty))


def _consistency_oracle(points, k_set, thr):
    n = len(points)
    S, O = [], []
    for k in k_set:
        s_sum = o_sum = 0.0
        for i in range(n):
            d = sorted((sum((a - b) ** 2 for a, b in zip(points[i][0], points[j][0])), j) for j in range(n) if j != i)
            nb = [j for _, j in d[:k]]
            s_sum += sum(points[j][1] == points[i][1] for j in nb) / k
            o_sum += sum((points[j][2] >= thr) == (points[i][2] >= thr) for j in nb) / k
        S.append(s_sum / n)
        O.append(o_sum / n)
    return sum(S) / len(S), sum(O) / len(O)


def test_criterion_11_metric_oracles():
    rank_bad = 0
    for t in range(100):
        rng = np.random.default_rng(40_000 + t)
        x = rng.normal(size=50).round(t % 3)
        y = (0.4 * x + rng.normal(size=50)).round(t % 2)
        got = rank_agreement(x, y)
        ref = (_pearson(_avg_ranks(list(x)), _avg_ranks(list(y))), _pearson(list(x), list(y)), _kendall_b(list(x), list(y)))
        rank_bad += any(abs(g - r) > 1e-9 for g, r in zip(got, ref))
    lc_bad = out_of_range = 0
    for t in range(50):
        rng = np.random.default_rng(50_000 + t)
        centres = rng.normal(scale=4.0, size=(3, 3))
        pts = []
        for _ in range(int(rng.integers(20, 40))):
            g = int(rng.integers(3))
            x = centres[g] + rng.normal(size=3)
            pts.append((tuple(x), g, float(x[0] + rng.normal())))
        thr = float(np.median([p[2] for p in pts]))
        got = local_consistency(pts, (3, 5, 10), thr)
        ref = _consistency_oracle(pts, (3, 5, 10), thr)
        lc_bad += any(abs(g - r) > 1e-12 for g, r in zip(got, ref))
        out_of_range += not all(0.0 <= v <= 1.0 for v in got)
    record(
        11,
        rank_bad == 0 and lc_bad == 0 and out_of_range == 0,
        f"rank agreement {rank_bad}/100 mismatches, local consistency {lc_bad}/50 mismatches, {out_of_range} out of [0,1]",
    )


def test_criterion_12_reproducibility(tmp_path):
    a, b = tmp_path / "w1", tmp_path / "w8"
    rc1 = cli_main(["run", "--seed", "42", "--workers", "1", "--output-dir", str(a)])
    rc8 = cli_main(["run", "--seed", "42", "--workers", "8", "--output-dir", str(b)])
    same = all((a / n).read_bytes() == (b / n).read_bytes() for n in ("trace.jsonl", "panel.json"))
    record(12, rc1 == rc8 == 0 and same, f"exit codes {rc1}/{rc8}, trace.jsonl and panel.json identical: {same}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))

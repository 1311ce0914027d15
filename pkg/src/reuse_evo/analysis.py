"""Diagnostics over runs and traces: overlap, rank agreement, hit rates,
local consistency, budget curves, hitting probability and pre/post selection.

Reference values from the original docking study are kept as constants for
documentation only; they depend on real evaluators and are not reproduced.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .core import Candidate, LatentPoint, SearchConfig, TaskContext, lex_key
from .evaluators import feasibility
from .kernels import knn
from .scoring import panel_utility
from .trace import TraceRecord, decode_utility

REFERENCE_OV5 = 0.887
REFERENCE_OV8 = 0.992
REFERENCE_BUDGET_SCORES = (0.437, 0.869)  # budgets 1 and 8
DEFAULT_K_SET = (3, 5, 10)


# ---------------------------------------------------------------------------
# Ranking metrics


def _top_ids(scores: Sequence[tuple[int, float]], k: int) -> set[int]:
    ordered = sorted(scores, key=lambda p: (-p[1], p[0]))
    return {i for i, _ in ordered[:k]}


def frontier_overlap(cheap_scores: Sequence[tuple[int, float]], full_scores: Sequence[tuple[int, float]], k: int) -> float:
    """Ov@k: share of the full evaluator's top-k also in the cheap top-k (ties by id)."""
    ids_c = [i for i, _ in cheap_scores]
    ids_f = [i for i, _ in full_scores]
    if len(set(ids_c)) != len(ids_c) or len(set(ids_f)) != len(ids_f):
        raise ValueError("duplicate ids in score lists")
    if set(ids_c) != set(ids_f):
        raise ValueError("cheap and full score lists cover different ids")
    if not 1 <= k <= len(ids_c):
        raise ValueError(f"k={k} must lie in [1, {len(ids_c)}]")
    return len(_top_ids(cheap_scores, k) & _top_ids(full_scores, k)) / k


def rank_agreement(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """(Spearman, Pearson, Kendall tau-b); undefined coefficients are NaN."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and of equal length")
    if x.size < 2:
        raise ValueError("rank_agreement needs at least two points")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return math.nan, math.nan, math.nan
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rho = stats.spearmanr(x, y).statistic
        r = stats.pearsonr(x, y).statistic
        tau = stats.kendalltau(x, y, variant="b").statistic
    clip = lambda v: float(min(1.0, max(-1.0, v)))
    return clip(rho), clip(r), clip(tau)


# ---------------------------------------------------------------------------
# Hit rates


def hit_rates(entries: Iterable[tuple[float, float, bool]], thresholds: tuple[float, float]) -> tuple[float, float]:
    """Dual-hit and feasible dual-hit rates of ``(a, b, feasible)`` triples."""
    entries = list(entries)
    if not entries:
        return 0.0, 0.0
    ta, tb = thresholds
    hits = [a > ta and b > tb for a, b, _ in entries]
    fhits = [h and f for h, (_, _, f) in zip(hits, entries)]
    return sum(hits) / len(entries), sum(fhits) / len(entries)


def dual_hit_rates(
    panel,
    thresholds: tuple[float, float],
    cfg: Optional[SearchConfig] = None,
    parents: Optional[Mapping[int, Candidate]] = None,
) -> tuple[float, float]:
    """Fractions of panel members above both thresholds at the final stage.

    The feasible variant also requires the hard feasibility predicate under
    ``cfg`` (defaults when omitted).
    """
    from .core import default_config

    cfg = cfg or default_config()
    parents = parents or {}
    entries = []
    for m in getattr(panel, "members", panel):
        aff = m.stage_affinity(cfg.S)
        if aff is None:
            entries.append((-math.inf, -math.inf, False))
            continue
        ok = feasibility(m, cfg, cfg.S, parents.get(m.id)).feasible
        entries.append((aff[0], aff[1], ok))
    return hit_rates(entries, thresholds)


def default_thresholds(ctx: TaskContext) -> tuple[float, float]:
    """Half of each target's landscape maximum."""
    return 0.5 * ctx.landscape_a.scale, 0.5 * ctx.landscape_b.scale


# ---------------------------------------------------------------------------
# Local consistency


def local_consistency_by_k(
    points: Sequence[tuple[Sequence[float], object, float]],
    k_set: Sequence[int] = DEFAULT_K_SET,
    threshold: float = 0.0,
) -> dict[int, tuple[float, float]]:
    """Per-k means of label agreement and objective-side agreement among k nearest neighbours.

    Neighbour ties are broken by position in ``points``.
    """
    n = len(points)
    k_set = [int(k) for k in k_set]
    if not k_set or min(k_set) < 1:
        raise ValueError("every k must be >= 1")
    if max(k_set) >= n:
        raise ValueError(f"k={max(k_set)} needs more than {n} points")
    coords = np.array([np.asarray(p[0], dtype=np.float64) for p in points])
    label_obj = [p[1] for p in points]
    side = np.array([float(p[2]) >= threshold for p in points])
    nbrs = knn(coords, max(k_set))
    same_label = np.array([[label_obj[j] == label_obj[i] for j in nbrs[i]] for i in range(n)], dtype=float)
    same_side = (side[nbrs] == side[:, None]).astype(float)
    out = {}
    for k in k_set:
        out[k] = (float(same_label[:, :k].mean()), float(same_side[:, :k].mean()))
    return out


def local_consistency(
    points: Sequence[tuple[Sequence[float], object, float]],
    k_set: Sequence[int] = DEFAULT_K_SET,
    threshold: float = 0.0,
) -> tuple[float, float]:
    """(S_bar, O_bar): averages over points, then over ``k_set``."""
    per_k = local_consistency_by_k(points, k_set, threshold)
    s = float(np.mean([v[0] for v in per_k.values()]))
    o = float(np.mean([v[1] for v in per_k.values()]))
    return s, o


# ---------------------------------------------------------------------------
# Hitting probability


def hitting_bound(alpha_imm: float, q: float, n_per_iteration: Sequence[int]) -> float:
    """``1 - prod_t (1 - alpha_imm * q) ** n_t``."""
    p = alpha_imm * q
    return 1.0 - (1.0 - p) ** int(sum(n_per_iteration))


def offspring_latents(records: Sequence[TraceRecord]) -> list[LatentPoint]:
    out = []
    for rec in records:
        for o in rec.offspring:
            out.append(LatentPoint(o["coords"], o["id"], o["birth_iteration"], o["operator"], tuple(o["parents"])))
    return out


def hitting_probability_experiment(
    region: Callable[[LatentPoint], bool],
    ctx: TaskContext,
    cfg: SearchConfig,
    runs: int = 2000,
    q: float = 0.5,
    first_seed: int = 0,
    workers: int = 1,
) -> tuple[float, float]:
    """(empirical hit rate, analytic lower bound) over seeds ``first_seed ..``.

    ``q`` is the prior mass of ``region``, supplied by the caller.
    """
    from .evolution import run_search

    def one(seed: int) -> bool:
        res = run_search(ctx, replace(cfg, seed=seed), record_candidates=False)
        return any(region(z) for z in offspring_latents(res.trace))

    seeds = range(first_seed, first_seed + runs)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            hits = list(ex.map(one, seeds))
    else:
        hits = [one(s) for s in seeds]
    bound = hitting_bound(cfg.alpha_imm, q, [cfg.B_off] * cfg.T)
    return sum(hits) / runs, bound


def binomial_margin(p: float, runs: int, sigmas: float = 3.0) -> float:
    return sigmas * math.sqrt(max(p * (1.0 - p), 0.0) / runs)


# ---------------------------------------------------------------------------
# Budget sensitivity


def offspring_evaluations(records: Sequence[TraceRecord]) -> list[tuple[float, bool]]:
    """(fitness, chemistry-floor reached) per offspring in evaluation order."""
    out = []
    for rec in sorted(records, key=lambda r: r.iteration):
        for o in sorted(rec.offspring, key=lambda o: o["id"]):
            out.append((float(o["fitness"]), bool(o["chem_ok"])))
    return out


def budget_curve(records: Sequence[TraceRecord], budgets: Sequence[int]) -> list[tuple[float, bool]]:
    """Per budget: best-so-far fitness and whether the chemistry floor was reached.

    Budgets beyond the available evaluations reuse the last value.
    """
    _check_budgets(budgets)
    evals = offspring_evaluations(records)
    out = []
    best = -math.inf
    reached = False
    done = 0
    for b in budgets:
        while done < min(b, len(evals)):
            fit, ok = evals[done]
            best = max(best, fit)
            reached = reached or ok
            done += 1
        out.append((best, reached))
    return out


def _check_budgets(budgets: Sequence[int]) -> None:
    if not budgets or min(budgets) < 1:
        raise ValueError("budgets must be positive")
    if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ValueError("budgets must be strictly increasing")


def budget_table(runs: Sequence[Sequence[TraceRecord]], budgets: Optional[Sequence[int]] = None) -> list[dict]:
    """Summary rows (mean, quartiles of best-so-far; recovery rate) across runs."""
    if budgets is None:
        longest = max((len(offspring_evaluations(r)) for r in runs), default=0)
        budgets = list(range(1, max(longest, 1) + 1))
    curves = [budget_curve(r, budgets) for r in runs]
    rows = []
    for j, b in enumerate(budgets):
        best = np.array([c[j][0] for c in curves], dtype=np.float64)
        finite = best[np.isfinite(best)]
        rec = [c[j][1] for c in curves]
        rows.append(
            {
                "budget": b,
                "runs": len(curves),
                "best_so_far_mean": float(finite.mean()) if finite.size else math.nan,
                "best_so_far_p25": float(np.percentile(finite, 25)) if finite.size else math.nan,
                "best_so_far_p75": float(np.percentile(finite, 75)) if finite.size else math.nan,
                "recovery_rate": sum(rec) / len(rec) if rec else 0.0,
            }
        )
    return rows


def budget_sweep(
    ctx: TaskContext,
    cfg: SearchConfig,
    budgets: Sequence[int],
    runs: int = 20,
    first_seed: Optional[int] = None,
) -> list[dict]:
    """Run ``runs`` seeded searches and tabulate best-so-far and recovery per budget."""
    from .evolution import run_search

    _check_budgets(budgets)
    start = cfg.seed if first_seed is None else first_seed
    traces = [run_search(ctx, replace(cfg, seed=start + r), record_candidates=False).trace for r in range(runs)]
    return budget_table(traces, budgets)


# ---------------------------------------------------------------------------
# Trace-derived tables


def header_context(header: dict) -> tuple[SearchConfig, TaskContext]:
    """Search configuration and task recovered from a run header."""
    from .config_io import document_from_dict

    doc = document_from_dict({"search": header["config"], "task": header["task"], "funnel": header["funnel"]})
    return doc.search, doc.task


def candidate_from_record(rec: dict) -> Candidate:
    """Rebuild a candidate from its trace record (noiseless affinities are not stored)."""
    aff = {}
    for s, entry in rec["stages"].items():
        aff[(int(s), "a")] = float(entry["a"])
        aff[(int(s), "b")] = float(entry["b"])
    return Candidate(
        id=rec["id"],
        origin_latent=rec["origin"],
        features=int(rec["features"], 16),
        latent=rec["latent"],
        base_affinity=(math.nan, math.nan),
        qed_like=rec["qed"],
        sa_like=rec["sa"],
        valid=rec["valid"],
        affinity=aff,
    )


def _stage_entry(rec: dict, stage: int) -> Optional[dict]:
    return rec["stages"].get(str(stage))


def funnel_rows(header: dict, records: Sequence[TraceRecord], run: int = 0) -> list[dict]:
    """Stage-1 versus final-stage affinity agreement on each iteration's stage-1 survivors."""
    cfg, _ = header_context(header)
    if cfg.S < 2:
        return []
    rows = []
    for rec in records:
        by_id = {c["id"]: c for c in rec.candidates}
        ids = rec.pools[1] if len(rec.pools) > 1 else []
        cheap, full = [], []
        for i in ids:
            e1, eS = _stage_entry(by_id[i], 1), _stage_entry(by_id[i], cfg.S)
            if e1 is None or eS is None or e1["f_aff"] is None or eS["f_aff"] is None:
                continue
            cheap.append((i, e1["f_aff"]))
            full.append((i, eS["f_aff"]))
        if len(cheap) < 2:
            continue
        rho, r, tau = rank_agreement([v for _, v in cheap], [v for _, v in full])
        row = {"run": run, "iteration": rec.iteration, "pool": len(cheap)}
        for k in (5, 8):
            row[f"ov_at_{k}"] = frontier_overlap(cheap, full, k) if k <= len(cheap) else math.nan
        row.update({"spearman": rho, "pearson": r, "kendall": tau})
        rows.append(row)
    return rows


def consistency_rows(
    header: dict,
    records: Sequence[TraceRecord],
    run: int = 0,
    k_set: Sequence[int] = DEFAULT_K_SET,
) -> list[dict]:
    """Local consistency of each iteration's decoded pool.

    Points are decoded positions, grouped by origin latent; the objective is
    the stage-1 balance-aware affinity split at its median.
    """
    rows = []
    for rec in records:
        pts = []
        for c in sorted(rec.candidates, key=lambda c: c["id"]):
            e1 = _stage_entry(c, 1)
            if e1 is None or e1["f_aff"] is None:
                continue
            pts.append((c["latent"], c["origin"], e1["f_aff"]))
        if len(pts) <= max(k_set):
            continue
        thr = float(np.median([p[2] for p in pts]))
        for k, (s, o) in local_consistency_by_k(pts, k_set, thr).items():
            rows.append({"run": run, "iteration": rec.iteration, "k": k, "points": len(pts), "S_bar": s, "O_bar": o})
    return rows


def _final_key(c: dict, S: int) -> tuple:
    e = _stage_entry(c, S)
    if e is None:
        return lex_key(False, -math.inf, c["id"])
    return lex_key(e["feasible"], decode_utility(e["h"]), c["id"])


def _set_metrics(cands: Sequence[dict], S: int, thresholds, cfg, ctx) -> dict:
    entries = []
    worst = []
    for c in cands:
        e = _stage_entry(c, S)
        entries.append((e["a"], e["b"], e["feasible"]))
        worst.append(min(e["a"], e["b"]))
    dual, fdual = hit_rates(entries, thresholds)
    return {
        "dual_hit": dual,
        "feasible_dual_hit": fdual,
        "worst_target_affinity": float(np.mean(worst)) if worst else math.nan,
        "utility": panel_utility([candidate_from_record(c) for c in cands], cfg, ctx),
    }


def pre_post_cases(
    header: dict,
    records: Sequence[TraceRecord],
    thresholds: Optional[tuple[float, float]] = None,
) -> list[dict]:
    """Per iteration with a nonempty panel: metrics of the top-N slice and of the panel."""
    cfg, ctx = header_context(header)
    thresholds = thresholds or default_thresholds(ctx)
    S = cfg.S
    out = []
    for rec in records:
        if not rec.panel_ids or not rec.candidates:
            continue
        by_id = {c["id"]: c for c in rec.candidates}
        terminal = [by_id[i] for i in rec.pools[-1]]
        top = sorted(terminal, key=lambda c: _final_key(c, S))[: cfg.N]
        panel = [by_id[i] for i in rec.panel_ids]
        out.append(
            {
                "iteration": rec.iteration,
                "pre": _set_metrics(top, S, thresholds, cfg, ctx),
                "post": _set_metrics(panel, S, thresholds, cfg, ctx),
            }
        )
    return out


PREPOST_METRICS = ("dual_hit", "feasible_dual_hit", "worst_target_affinity", "utility")


def pre_post_selection_compare(
    runs: Sequence[tuple[dict, Sequence[TraceRecord]]],
    thresholds: Optional[tuple[float, float]] = None,
) -> list[dict]:
    """Two rows, the terminal pool's top-N-by-h slice and the constructed panel,
    with metrics averaged over every iteration that produced a panel."""
    cases = [c for header, recs in runs for c in pre_post_cases(header, recs, thresholds)]
    rows = []
    for which, label in (("pre", "top_n_by_h"), ("post", "panel")):
        row = {"set": label, "cases": len(cases)}
        for m in PREPOST_METRICS:
            vals = [c[which][m] for c in cases]
            row[m] = float(np.mean(vals)) if vals else math.nan
        rows.append(row)
    return rows


def run_metrics_rows(result) -> list[dict]:
    """Per-iteration summary of a run, as written to metrics.csv."""
    cfg = result.config
    _, ctx = header_context(result.header)
    thresholds = default_thresholds(ctx)
    rows = []
    for rec, panel in zip(result.trace, result.panels):
        dual, fdual = dual_hit_rates(panel, thresholds, cfg)
        row = {"iteration": rec.iteration}
        for s, size in enumerate(rec.pool_sizes):
            row[f"pool_{s}"] = size
        row.update(
            {
                "funnel_cost": rec.funnel_cost,
                "fitness_cost": rec.fitness_cost,
                "panel_size": len(rec.panel_ids),
                "panel_utility": rec.panel_utility,
                "incumbent_utility": rec.incumbent_utility,
                "dual_hit": dual,
                "feasible_dual_hit": fdual,
                "best_fitness": max(p["fitness"] for p in rec.population),
            }
        )
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return repr(v)
    return str(v)


def write_csv(rows: Sequence[dict], fh=None, columns: Optional[Sequence[str]] = None) -> str:
    """Write rows with a header line; returns the text when ``fh`` is None."""
    sink = fh if fh is not None else io.StringIO()
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return sink.getvalue() if fh is None else ""

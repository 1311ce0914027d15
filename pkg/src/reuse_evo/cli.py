"""Command-line entry point: ``reuse run | verify | analyze | sweep``."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import analysis
from .config_io import RunConfigDocument, load_document_file
from .core import ConfigError
from .evolution import RunResult, run_search
from .trace import SCHEMA_VERSION, TraceError, dumps, encode_utility, read_trace, write_trace
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_WRITE = 0, 1, 2, 3
REPORTS = ("budget", "funnel", "consistency", "prepost")


def _err(msg: str) -> None:
    print(f"reuse: {msg}", file=sys.stderr)


def resolve_workers(flag: Optional[int]) -> int:
    if flag is not None:
        value = flag
    else:
        raw = os.environ.get("REUSE_WORKERS", "1")
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"REUSE_WORKERS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError("workers must be >= 1")
    return value


def panel_document(result: RunResult) -> dict:
    """JSON form of the final incumbent; ``empty`` marks a run without any panel."""
    cfg = result.config
    inc = result.incumbent
    members = []
    for m in inc.members:
        a, b = m.stage_affinity(cfg.S)
        members.append(
            {
                "id": m.id,
                "origin": m.origin_latent,
                "features": f"{m.features:016x}",
                "qed": m.qed_like,
                "sa": m.sa_like,
                "a": a,
                "b": b,
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": result.seed,
        "empty": inc.empty,
        "size": len(inc.members),
        "utility": encode_utility(inc.utility),
        "source_iteration": inc.source_iteration if not inc.empty else None,
        "members": members,
    }


def write_outputs(result: RunResult, out_dir: Path, formats: Sequence[str]) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "trace" in formats:
        path = out_dir / "trace.jsonl"
        write_trace(path, result.header, result.trace)
        written.append(path)
    if "panel" in formats:
        path = out_dir / "panel.json"
        path.write_text(dumps(panel_document(result)) + "\n", encoding="utf-8")
        written.append(path)
    if "metrics" in formats:
        path = out_dir / "metrics.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            analysis.write_csv(analysis.run_metrics_rows(result), fh, metrics_columns(result))
        written.append(path)
    return written


def metrics_columns(result: RunResult) -> list[str]:
    pools = [f"pool_{s}" for s in range(result.config.S + 1)]
    return ["iteration", *pools, "funnel_cost", "fitness_cost", "panel_size", "panel_utility",
            "incumbent_utility", "dual_hit", "feasible_dual_hit", "best_fitness"]


def _load(path: Optional[str]) -> RunConfigDocument:
    if path is None:
        return RunConfigDocument()
    try:
        return load_document_file(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def cmd_run(args) -> int:
    try:
        doc = _load(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.iterations is not None:
            overrides["T"] = args.iterations
        cfg = replace(doc.search, **overrides) if overrides else doc.search
        workers = resolve_workers(args.workers)
        result = run_search(doc.task, cfg, workers=workers)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    out_dir = Path(args.output_dir or doc.output.directory)
    try:
        written = write_outputs(result, out_dir, doc.output.formats)
    except OSError as exc:
        _err(f"cannot write outputs to {out_dir}: {exc.strerror or exc}")
        return EXIT_WRITE
    for p in written:
        print(p)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        _err(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
        return EXIT_CONFIG
    try:
        workers = resolve_workers(args.workers)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    return EXIT_OK if run_suite(args.suite, args.runs, workers) else EXIT_FAIL


def report_rows(report: str, headers, runs) -> list[dict]:
    pairs = list(zip(headers, runs))
    if report == "budget":
        return analysis.budget_table([recs for _, recs in pairs])
    if report == "funnel":
        return [row for i, (h, recs) in enumerate(pairs) for row in analysis.funnel_rows(h, recs, i)]
    if report == "consistency":
        return [row for i, (h, recs) in enumerate(pairs) for row in analysis.consistency_rows(h, recs, i)]
    return analysis.pre_post_selection_compare(pairs)


def cmd_analyze(args) -> int:
    if args.report not in REPORTS:
        _err(f"unknown report {args.report!r}")
        return EXIT_CONFIG
    try:
        headers, runs = read_trace(args.trace)
        rows = report_rows(args.report, headers, runs)
    except TraceError as exc:
        _err(f"corrupt trace {args.trace}: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        _err(f"cannot read trace {args.trace}: {exc.strerror}")
        return EXIT_CONFIG
    except (ConfigError, KeyError) as exc:
        _err(f"trace header is unusable: {exc}")
        return EXIT_CONFIG
    try:
        if args.output:
            with open(args.output, "w", encoding="utf-8", newline="") as fh:
                analysis.write_csv(rows, fh)
        else:
            analysis.write_csv(rows, sys.stdout)
    except OSError as exc:
        _err(f"cannot write {args.output}: {exc.strerror}")
        return EXIT_WRITE
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        doc = _load(args.config)
        budgets = args.budgets or list(range(1, doc.search.T * doc.search.B_off + 1))
        rows = analysis.budget_sweep(doc.task, doc.search, budgets, runs=args.runs, first_seed=args.seed)
    except (ConfigError, ValueError) as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    try:
        if args.output:
            with open(args.output, "w", encoding="utf-8", newline="") as fh:
                analysis.write_csv(rows, fh)
        else:
            analysis.write_csv(rows, sys.stdout)
    except OSError as exc:
        _err(f"cannot write {args.output}: {exc.strerror}")
        return EXIT_WRITE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reuse", description="Hierarchical evolutionary input-space search on synthetic dual-objective tasks.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one seeded search and write trace, panel and metrics")
    r.add_argument("config", nargs="?", help="YAML run configuration (defaults when omitted)")
    r.add_argument("--seed", type=int, default=None, help="root seed (config value, else 0)")
    r.add_argument("--iterations", type=int, default=None, help="override search.T")
    r.add_argument("--output-dir", default=None, help="override output.directory")
    r.add_argument("--workers", type=int, default=None, help="evaluation threads (env REUSE_WORKERS)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run a property suite")
    v.add_argument("--suite", required=True, help=f"one of {', '.join(SUITES)}")
    v.add_argument("--runs", type=int, default=None, help="runs or pools per property")
    v.add_argument("--workers", type=int, default=None)
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("analyze", help="emit a CSV report from a trace file")
    a.add_argument("trace")
    a.add_argument("--report", required=True, help=f"one of {', '.join(REPORTS)}")
    a.add_argument("--output", default=None, help="CSV path (stdout when omitted)")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="budget-sensitivity sweep over seeded runs")
    s.add_argument("config", nargs="?")
    s.add_argument("--runs", type=int, default=20)
    s.add_argument("--seed", type=int, default=0, help="first seed")
    s.add_argument("--budgets", type=int, nargs="+", default=None)
    s.add_argument("--output", default=None)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

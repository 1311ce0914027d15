"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Each backend runs in its own subprocess (the fallback with
``REUSE_DISABLE_NUMBA=1``) so the import-time switch is honoured. Numba
compilation is excluded by a warm-up call.
"""

import argparse
import json
import os
import subprocess
import sys
import timeit


def cases():
    import numpy as np

    from reuse_evo import kernels
    from reuse_evo.core import default_config
    from reuse_evo.evolution import run_search
    from reuse_evo.generator import default_task

    rng = np.random.default_rng(0)
    fps = rng.integers(0, 2**63, size=200, dtype=np.uint64)
    dist = kernels.tanimoto_matrix(fps)
    pool = 20
    sub_fps = fps[:pool]
    sub_dist = kernels.tanimoto_matrix(sub_fps)
    values = np.sort(rng.normal(size=pool))[::-1].copy()
    ids = np.arange(pool, dtype=np.int64)
    pts = rng.normal(size=(300, 8))
    cfg, ctx = default_config(), default_task()
    return {
        "tanimoto_matrix n=200": lambda: kernels.tanimoto_matrix(fps),
        "min_offdiag n=200": lambda: kernels.min_offdiag(dist),
        "best_subset pool=20 N=10": lambda: kernels.best_subset(values, sub_dist, 0.3, 10, ids, 0.01),
        "knn n=300 k=10": lambda: kernels.knn(pts, 10),
        "run_search default": lambda: run_search(ctx, cfg, record_candidates=False),
    }


def measure(repeat):
    from reuse_evo._accel import HAS_NUMBA

    out = {"numba": HAS_NUMBA, "times": {}}
    for name, fn in cases().items():
        fn()
        number = 1 if name.startswith("run_search") else 5
        best = min(timeit.repeat(fn, number=number, repeat=repeat)) / number
        out["times"][name] = best
    return out


def child(disable, repeat):
    env = dict(os.environ)
    env.pop("REUSE_DISABLE_NUMBA", None)
    if disable:
        env["REUSE_DISABLE_NUMBA"] = "1"
    proc = subprocess.run(
        [sys.executable, __file__, "--child", "--repeat", str(repeat)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        print(json.dumps(measure(args.repeat)))
        return
    fast, slow = child(False, args.repeat), child(True, args.repeat)
    if not fast["numba"]:
        print("numba is not installed; both columns use the numpy fallback")
    print(f"{'kernel':<28}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, t_fast in fast["times"].items():
        t_slow = slow["times"][name]
        print(f"{name:<28}{t_fast * 1e3:>12.3f}{t_slow * 1e3:>12.3f}{t_slow / t_fast:>9.1f}x")


if __name__ == "__main__":
    main()

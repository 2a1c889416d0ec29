"""Time the compiled and pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--size 32] [--horizon 1024] [--repeat 3]
"""

import argparse
import time

import numpy as np

from lowmem_experts import _core_py
from lowmem_experts.hedger import squint_prior

try:
    from lowmem_experts import _core
except ImportError:
    _core = None


def interval_run(mod, size, horizon, seed=0):
    pr = squint_prior()
    core = mod.IntervalCore(size, horizon, np.asarray(pr.eta), pr.logscale)
    rng = np.random.default_rng(seed)
    U = rng.random((horizon, core.levels + 1))
    X = rng.random((horizon, size))
    t0 = time.perf_counter()
    for u, x in zip(U, X):
        core.act(u)
        core.observe(x)
    return time.perf_counter() - t0


def mwu_run(mod, size, reps, seed=0):
    rng = np.random.default_rng(seed)
    cum = rng.random(size) * 10
    us = rng.random(reps)
    t0 = time.perf_counter()
    for u in us:
        mod.mwu_sample(cum, 0.3, u)
    return time.perf_counter() - t0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--horizon", type=int, default=1024)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    mods = [("python", _core_py)] + ([("cython", _core)] if _core is not None else [])
    rows = []
    for label, fn in [("IntervalCore act+observe", lambda m: interval_run(m, args.size, args.horizon)),
                      ("mwu_sample", lambda m: mwu_run(m, args.size, 20_000))]:
        times = {name: min(fn(mod) for _ in range(args.repeat)) for name, mod in mods}
        rows.append((label, times))
    print(f"{'kernel':28s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s}")
    for label, t in rows:
        cy = t.get("cython")
        speed = f"{t['python'] / cy:8.1f}" if cy else "     n/a"
        print(f"{label:28s} {t['python']:10.4f} {cy if cy else float('nan'):10.4f} {speed}")


if __name__ == "__main__":
    main()

"""Time the compiled and pure-Python solver loops on the same problems.

    python3 benchmarks/bench_smo.py [--samples 400] [--K 5] [--repeat 3]
"""
import argparse
import time

import numpy as np

from tor_lab.data import SynthConfig, gen_synthetic, to_csr
from tor_lab.kernels import GramCache, KernelKind
from tor_lab.losses import LossKind
from tor_lab.solvers import BACKENDS, ExtendedProblem, solve_primal, solve_smo


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=400)
    ap.add_argument("--K", type=int, default=5)
    ap.add_argument("--p", type=float, default=0.1)
    ap.add_argument("--c1", type=float, default=10.0)
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    ds = gen_synthetic(SynthConfig(K=args.K, p=args.p, n_samples=args.samples, seed=0))
    X = to_csr(ds.vectors, ds.dim)
    gram = GramCache(KernelKind("linear"), X)
    problem = ExtendedProblem.from_labels(gram, ds.labels, args.c1, args.K)
    print(f"{args.samples} samples, {problem.size} augmented points, "
          f"backends: {', '.join(BACKENDS)}")
    results = {}
    for name in BACKENDS:
        t_smo, sol = best_of(lambda: solve_smo(problem, backend=name), args.repeat)
        t_sgd, prim = best_of(lambda: solve_primal(LossKind.HINGE, X, ds.labels, args.c1, args.K,
                                                   epochs=args.epochs, backend=name,
                                                   polish=False), args.repeat)
        results[name] = (sol.objective, prim.objective)
        print(f"{name:>7}: smo {t_smo:8.3f}s ({sol.diagnostics.iterations} pair updates, "
              f"dual {sol.objective:.10g})  sgd {t_sgd:8.3f}s (objective {prim.objective:.10g})")
    if len(results) > 1:
        objs = np.array(list(results.values()))
        print("objectives identical across backends:", bool(np.all(objs == objs[0])))


if __name__ == "__main__":
    main()

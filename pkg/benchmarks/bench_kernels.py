"""Time the compiled and numpy kernels on the same problems.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Reports the best wall time per call for the likelihood, the gradient and a
full fit, for a small and a large comparison table.
"""

import argparse
import timeit

import numpy as np

from judgerank import _backend
from judgerank.estimator import FitConfig, fit_weighted
from judgerank.model import grad_log_likelihood, log_likelihood
from judgerank.simulator import TruthSpec, gen_truth, simulate_triples

PROBLEMS = {"small (N=10, K=5)": (10, 5, 10**5), "large (N=60, K=20)": (60, 20, 10**6)}


def bench(fn, repeat):
    calls = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=calls, repeat=repeat)) / calls


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = _backend.available()
    if "c" not in backends:
        print("compiled extension not built; only the numpy kernels are timed")
    cfg = FitConfig(max_iters=500, grad_tol=1e-300, param_tol=1e-300)
    for label, (N, K, T) in PROBLEMS.items():
        truth = gen_truth(TruthSpec(N, K, seed=1))
        triples = simulate_triples(truth, T, seed=2)
        print(f"\n{label}: {len(triples)} triples")
        print(f"  {'kernel':<22}" + "".join(f"{b:>14}" for b in backends)
              + ("     speedup" if len(backends) == 2 else ""))
        cases = {
            "loglik": lambda k: (lambda: log_likelihood(truth, triples, k)),
            "gradient": lambda k: (lambda: grad_log_likelihood(truth, triples, k)),
            "fit, 500 Adam steps": lambda k: (lambda: fit_weighted(triples, config=cfg, kernels=k)),
        }
        for name, make in cases.items():
            times = [bench(make(_backend.load(b)), args.repeat) for b in backends]
            line = f"  {name:<22}" + "".join(f"{t * 1e3:>12.3f}ms" for t in times)
            if len(times) == 2:
                line += f"{times[1] / times[0]:>11.1f}x"
            print(line)


if __name__ == "__main__":
    main()

"""Compare the compiled posterior kernels against the pure-Python fallback.

Runs the same responsibility computations through both backends and reports
wall time plus the largest numerical disagreement.  Usage:

    python3 benchmarks/bench_kernels.py [--n 200000] [--k 4] [--repeats 5]
"""

from __future__ import annotations

import argparse
import importlib
import time

import numpy as np


def _load_backends():
    from emkit import _kernels

    backends = {"python": importlib.import_module("emkit._kernels.py")}
    try:
        backends["compiled"] = importlib.import_module("emkit._kernels._core")
    except ImportError:
        pass
    return backends, _kernels.BACKEND


def _time(fn, args, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=200_000)
    parser.add_argument("--k", type=int, default=4)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends, active = _load_backends()
    print(f"active backend: {active}; available: {sorted(backends)}")
    if "compiled" not in backends:
        print("compiled extension missing -- timing the fallback only")

    rng = np.random.default_rng(args.seed)
    k = args.k
    log_w = np.log(np.full(k, 1.0 / k))

    y = np.concatenate([rng.normal(3.0 * j, 1.0, args.n // k) for j in range(k)])
    mu = np.arange(k, dtype=float) * 3.0
    var = np.full(k, 1.0)
    counts = rng.poisson(5.0, args.n).astype(float)
    rates = np.linspace(1.0, 10.0, k)

    cases = [
        ("gmm_posterior", (y, log_w, mu, var)),
        ("poisson_posterior", (counts, log_w, rates)),
    ]
    for name, case_args in cases:
        print(f"\n{name}  (n={args.n}, k={k})")
        results = {}
        for bname, mod in sorted(backends.items()):
            secs, (loglik, resp) = _time(getattr(mod, name), case_args, args.repeats)
            results[bname] = (secs, loglik, resp)
            print(f"  {bname:<9} {secs * 1e3:9.2f} ms   loglik={loglik:.10f}")
        if len(results) == 2:
            py_s, py_l, py_r = results["python"]
            c_s, c_l, c_r = results["compiled"]
            print(f"  speedup   {py_s / c_s:9.2f}x")
            print(f"  max |resp diff| = {np.abs(py_r - c_r).max():.3e}, "
                  f"|loglik diff| = {abs(py_l - c_l):.3e}")


if __name__ == "__main__":
    main()

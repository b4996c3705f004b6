"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Prints one line per (kernel, backend) with the best-of-repeat time and the
speedup of the compiled backend.  Without a built extension only the
fallback rows are printed.
"""

import argparse
import timeit

import numpy as np

from vpropkit import kernels
from vpropkit.evaluation import gauss_hermite
from vpropkit.numkit import RngStream


def _cases():
    rng = RngStream(0)
    n = 1605
    m = rng.standard_normal(n)
    v = np.exp(rng.standard_normal(n))
    y = np.where(rng.uniform(n) < 0.5, 1.0, -1.0)
    rule = gauss_hermite(40)
    yield "gh_logsig_moments N=1605 Q=40", lambda mod: mod.gh_logsig_moments(m, v, y, rule.nodes, rule.weights)

    sizes = [15, 10, 10, 1]
    dim = sum(sizes[i + 1] * sizes[i] + sizes[i + 1] for i in range(len(sizes) - 1))
    theta = rng.standard_normal(dim)
    for rows in (32, 345):
        X = rng.standard_normal((rows, 15))
        yy = np.where(rng.uniform(rows) < 0.5, 1.0, -1.0)
        yield (
            f"mlp_value_grad 15-10-10-1 M={rows}",
            lambda mod, X=X, yy=yy: mod.mlp_value_grad(theta, X, yy, sizes, kernels.ACT_TANH),
        )


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    backends = kernels.backends()
    print(f"active backend: {kernels.BACKEND}")
    for name, fn in _cases():
        times = {}
        for bname, mod in backends.items():
            number = 50
            best = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
            times[bname] = best
            print(f"{name:<36} {bname:<9} {best * 1e6:10.1f} us")
        if "compiled" in times:
            print(f"{name:<36} speedup   {times['python'] / times['compiled']:10.2f}x")


if __name__ == "__main__":
    main()

"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--sizes 16 64 128]

Prints one row per (kernel, size) with the best-of-``repeat`` wall time of
each backend and the speedup.  Results are also checked for agreement.
"""

import argparse
import time

import numpy as np

from diffusion_factor import _kernels_py as pure

try:
    from diffusion_factor import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def random_spd(rng, n):
    x = rng.standard_normal((2 * n, n))
    return x.T @ x / (2 * n) + 0.1 * np.eye(n)


def bench_jacobi(rng, n, repeat):
    a = random_spd(rng, n)
    tol = 1e-12 * np.linalg.norm(a)
    rows = {}
    for name, mod in (("python", pure), ("cython", compiled)):
        if mod is None:
            continue
        sec, (vals, _, _, _) = best_time(lambda m=mod: m.jacobi_eigh(a, tol, 100), repeat)
        rows[name] = (sec, np.sort(vals))
    return rows


def bench_pgd(rng, n, repeat):
    sigma = random_spd(rng, n)
    mu = rng.normal(0.05, 0.02, n)
    eta = 3.0
    step = 1.0 / (eta * np.linalg.eigvalsh(sigma)[-1])
    w0 = np.full(n, 1.0 / n)
    bound = 2.0 / n
    rows = {}
    for name, mod in (("python", pure), ("cython", compiled)):
        if mod is None:
            continue
        sec, (w, _) = best_time(
            lambda m=mod: m.pgd_qp(mu, sigma, eta, step, 1, bound, w0, 1e-12, 20000), repeat
        )
        rows[name] = (sec, w)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 32, 64, 128])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<8} {'n':>5} {'python_ms':>11} {'cython_ms':>11} {'speedup':>8} {'max_diff':>10}")
    for kernel, fn in (("jacobi", bench_jacobi), ("pgd_qp", bench_pgd)):
        for n in args.sizes:
            rows = fn(rng, n, args.repeat)
            tp, xp = rows["python"]
            if "cython" in rows:
                tc, xc = rows["cython"]
                diff = float(np.max(np.abs(xp - xc)))
                print(f"{kernel:<8} {n:>5} {1e3 * tp:>11.3f} {1e3 * tc:>11.3f} {tp / tc:>8.2f} {diff:>10.2e}")
            else:
                print(f"{kernel:<8} {n:>5} {1e3 * tp:>11.3f} {'n/a':>11} {'n/a':>8} {'n/a':>10}")


if __name__ == "__main__":
    main()

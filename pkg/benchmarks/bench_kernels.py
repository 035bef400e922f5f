"""Timing comparison of the compiled kernels against the NumPy fallback.

Runs each kernel on identical inputs through both backends and reports the
best wall time over a few repeats. The compiled column disappears when the
extension is not built.

    python3 benchmarks/bench_kernels.py [--size N] [--curve-size N]
        [--candidates K] [--repeats R] [--threads T]
"""
import argparse
import time

import numpy as np

from qkit import _kernels_py as fallback

try:
    from qkit import _kernels as compiled
except ImportError:
    compiled = None


def best_time(fn, repeats):
    fn()  # warmup
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_cases(n, curve_n, candidates, threads):
    rng = np.random.default_rng(7)
    x = rng.normal(0.0, 1.0, n).astype(np.float32)
    m = float(np.abs(x).max())
    s = 2.0 * m / 255.0
    codes_u = fallback.encode_uniform(x, -m, m, s, 0.0, -128, 127)

    p = 0.3 * m
    edges = np.array([0.0, p, m])
    scales = np.array([p / 127.0, (m - p) / 127.0])
    offsets = np.array([0.0, p])
    codes_p, regions = fallback.encode_pwlq(x, edges, scales, 127)

    a_sorted = np.sort(np.abs(rng.normal(0.0, 1.0, curve_n).astype(np.float32)))
    curve_m = float(a_sorted[-1])
    ps = curve_m * np.arange(1, candidates + 1) / (candidates + 1.0)

    w = rng.integers(-128, 128, n).astype(np.int32)

    return [
        ("encode_uniform", n,
         lambda k: k.encode_uniform(x, -m, m, s, 0.0, -128, 127)),
        ("decode_uniform", n,
         lambda k: k.decode_uniform(codes_u, s, 0.0)),
        ("mse_uniform", n,
         lambda k: k.mse_uniform(x, -m, m, s, 0.0, -128, 127)),
        ("encode_pwlq", n,
         lambda k: k.encode_pwlq(x, edges, scales, 127)),
        ("decode_pwlq", n,
         lambda k: k.decode_pwlq(codes_p, regions, scales, offsets, 0.0)),
        (f"mse_curve_pwlq[{candidates}]", curve_n,
         lambda k: k.mse_curve_pwlq(a_sorted, curve_m, 127, ps, threads)),
        ("accumulate_uniform", n,
         lambda k: k.accumulate_uniform(codes_u, w)),
        ("accumulate_pwlq", n,
         lambda k: k.accumulate_pwlq(codes_u, codes_p, regions, 2)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=10_000_000,
                    help="elements for the elementwise kernels")
    ap.add_argument("--curve-size", type=int, default=1_000_000,
                    help="elements for the breakpoint sweep kernel")
    ap.add_argument("--candidates", type=int, default=100,
                    help="breakpoint candidates in the sweep")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--threads", type=int, default=0,
                    help="thread cap for the compiled sweep (0 = default)")
    args = ap.parse_args(argv)

    cases = build_cases(args.size, args.curve_size, args.candidates, args.threads)

    name_w = max(len(name) for name, _, _ in cases)
    if compiled is None:
        print("compiled extension not built; timing the fallback only\n")
        print(f"{'kernel':<{name_w}}  {'n':>10}  {'fallback':>10}")
        for name, n, run in cases:
            tf = best_time(lambda: run(fallback), args.repeats)
            print(f"{name:<{name_w}}  {n:>10}  {tf * 1e3:>8.1f}ms")
        return 0

    print(f"{'kernel':<{name_w}}  {'n':>10}  {'compiled':>10}  "
          f"{'fallback':>10}  {'speedup':>7}")
    for name, n, run in cases:
        tc = best_time(lambda: run(compiled), args.repeats)
        tf = best_time(lambda: run(fallback), args.repeats)
        print(f"{name:<{name_w}}  {n:>10}  {tc * 1e3:>8.1f}ms  "
              f"{tf * 1e3:>8.1f}ms  {tf / tc:>6.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

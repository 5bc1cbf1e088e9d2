"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_accel.py [--n 2000] [--d 32] [--repeat 3]

Both paths are called directly, so one process covers both. The first numba
call (compilation) is excluded from the timings.
"""
import argparse
import timeit

import numpy as np

from ralign import _accel


def cases(x, y):
    yield "sqdist", (_accel.sqdist_numpy, _accel.sqdist_numba), (x, x)
    yield "linear gram", (_accel.linear_numpy, _accel.linear_numba), (x, x)
    yield "distance alignment", (_accel.distance_alignment_rows_numpy, _accel.distance_alignment_rows_numba), (x, y)
    yield (
        "rbf x linear products",
        (_accel.kernel_product_rows_numpy, _accel.kernel_product_rows_numba),
        (x, y, _accel.KIND_RBF, 0.05, _accel.KIND_LINEAR, 0.0),
    )


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--d", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    x = rng.standard_normal((args.n, args.d))
    y = rng.standard_normal((args.n, args.d // 2 or 1))
    print(f"n={args.n} d={args.d} best of {args.repeat}")
    print(f"{'kernel':<24}{'numpy s':>10}{'numba s':>10}{'speedup':>9}  max|diff|")
    for name, (slow, fast), call in cases(x, y):
        fast(*call)  # compile
        t_np = min(timeit.repeat(lambda: slow(*call), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: fast(*call), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(slow(*call) - fast(*call))))
        print(f"{name:<24}{t_np:>10.4f}{t_nb:>10.4f}{t_np / t_nb:>8.1f}x  {diff:.1e}")


if __name__ == "__main__":
    main()

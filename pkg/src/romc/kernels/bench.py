"""Micro-benchmark comparing the compiled and numpy kernel backends.

Run with:  python -m romc.kernels.bench [--repeats N]

Times the batch distance kernels for both benchmark models at several
batch sizes and reports the per-call speedup of the compiled backend.
"""

import argparse
import time

import numpy as np

from . import _numpy


def _time_call(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(repeats=5, sizes=(1, 32, 1024, 16384)):
    try:
        from . import _native
    except ImportError:
        _native = None

    rng = np.random.default_rng(0)
    noise = rng.standard_normal(102)
    u = float(rng.standard_normal())
    rows = []
    for n in sizes:
        th2 = rng.uniform(-1, 1, size=(n, 2))
        th1 = rng.uniform(-2, 2, size=n)
        loops = max(1, 4096 // n)
        for name, args in (
            ("ma2", (th2, noise, 0.1, -0.05)),
            ("toy", (th1, u, 0.0)),
        ):
            fn_np = _numpy.ma2_distance_batch if name == "ma2" else _numpy.toy_distance_batch
            t_np = _time_call(lambda: [fn_np(*args) for _ in range(loops)], repeats) / loops
            if _native is not None:
                fn_na = _native.ma2_distance_batch if name == "ma2" else _native.toy_distance_batch
                t_na = _time_call(lambda: [fn_na(*args) for _ in range(loops)], repeats) / loops
            else:
                t_na = None
            rows.append((name, n, t_np, t_na))
    return rows, _native is not None


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats per case")
    args = parser.parse_args(argv)

    rows, have_native = run(repeats=args.repeats)
    print(f"{'kernel':<6} {'batch':>7} {'numpy':>12} {'native':>12} {'speedup':>8}")
    for name, n, t_np, t_na in rows:
        if t_na is None:
            print(f"{name:<6} {n:>7} {t_np * 1e6:>10.2f}us {'n/a':>12} {'n/a':>8}")
        else:
            print(
                f"{name:<6} {n:>7} {t_np * 1e6:>10.2f}us {t_na * 1e6:>10.2f}us "
                f"{t_np / t_na:>7.1f}x"
            )
    if not have_native:
        print("compiled backend not available; showing numpy timings only")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

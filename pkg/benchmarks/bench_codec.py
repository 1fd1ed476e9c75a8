"""Time the septet packing kernels against each other.

The codec picks a jit-compiled kernel when numba imports, and a vectorized
numpy fallback otherwise (PWSIM_NO_NUMBA=1 forces the fallback).  This script
times both, plus the plain-python reference the jit is compiled from, over
message sizes that actually occur: one page (93 septets), a full 15-page
warning (1395), and a burst of 32 single-page warnings.

Run it from the repository root:

    python3 benchmarks/bench_codec.py
    python3 benchmarks/bench_codec.py --repeat 2000
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pwsim import kernels

SIZES = [
    ("one page", [93]),
    ("full warning", [1395]),
    ("32-warning burst", [93] * 32),
]


def build_inputs(lengths, seed=0x6757):
    rng = np.random.default_rng(seed)
    return [rng.integers(0, 0x80, size=n, dtype=np.uint8) for n in lengths]


def time_fn(fn, args_list, repeat):
    # one untimed pass so jit compilation never lands in the measurement
    for args in args_list:
        fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for args in args_list:
            fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def report(title, septets, rows, args_list, repeat):
    print(f"{title} ({septets} septets)")
    timings = [(name, time_fn(fn, args_list, repeat)) for name, fn in rows]
    python_secs = dict(timings)["python"]
    for name, secs in timings:
        print(f"  {name:<7}{secs * 1e6:9.2f} us  {secs / septets * 1e9:8.2f} ns/septet"
              f"  {python_secs / secs:6.1f}x vs python")
    print()


def bench_pack(label, arrays, repeat):
    rows = [("numpy", kernels._pack_np), ("python", kernels._pack_py)]
    if kernels.BACKEND == "numba":
        rows.insert(0, ("numba", kernels._pack_jit))
    report(f"pack   {label}", sum(a.size for a in arrays), rows,
           [(a,) for a in arrays], repeat)


def bench_unpack(label, arrays, repeat):
    packed = [(np.frombuffer(kernels.pack_septets(a), dtype=np.uint8), a.size)
              for a in arrays]
    rows = [("numpy", kernels._unpack_np), ("python", kernels._unpack_py)]
    if kernels.BACKEND == "numba":
        rows.insert(0, ("numba", kernels._unpack_jit))
    report(f"unpack {label}", sum(a.size for a in arrays), rows, packed, repeat)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200,
                        help="timed passes per kernel (best-of is reported)")
    args = parser.parse_args()
    print(f"active backend: {kernels.BACKEND}\n")
    for label, lengths in SIZES:
        arrays = build_inputs(lengths)
        bench_pack(label, arrays, args.repeat)
        bench_unpack(label, arrays, args.repeat)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

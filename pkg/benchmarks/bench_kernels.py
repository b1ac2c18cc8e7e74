"""Time the numba kernels against their numpy fallbacks on identical inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Both registries are importable side by side, so one process measures both.
Each case also reports the largest difference between the two outputs:
zero for the NN kernels, a few ulps for the disk area (libm ``asin`` vs
numpy ``arcsin``).
"""
import argparse
import json
import time

import numpy as np

from nnball.kernels import NUMBA_KERNELS, NUMPY_KERNELS


def _cases(rng):
    x1 = rng.random(100_000)
    batch1 = rng.random((200, 4096))
    p2 = rng.random((20_000, 2))
    batch2 = rng.random((20, 4096, 2))
    brute = rng.random((2000, 2))
    cx, cy = rng.uniform(-0.3, 1.3, (2, 200_000))
    r = rng.uniform(0.0, 0.8, 200_000)
    return [
        ("nn_sorted_1d", (x1,), "n=1e5"),
        ("nn_batch_sorted_1d", (batch1,), "200 x 4096"),
        ("nn_grid", (p2,), "n=2e4, d=2"),
        ("nn_batch_grid_2d", (batch2,), "20 x 4096, d=2"),
        ("nn_brute", (brute,), "n=2000, d=2"),
        ("disk_square_area", (cx, cy, r), "2e5 disks"),
    ]


def _best(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", metavar="PATH")
    args = ap.parse_args()

    if not NUMBA_KERNELS:
        print("numba unavailable or disabled; timing the numpy path only")
    rng = np.random.default_rng(args.seed)
    rows = []
    print(f"{'kernel':<20} {'input':<16} {'numpy s':>10} {'numba s':>10} {'speedup':>8}  max|diff|")
    for name, inputs, desc in _cases(rng):
        t_np, out_np = _best(NUMPY_KERNELS[name], inputs, args.repeat)
        row = {"kernel": name, "input": desc, "numpy_s": t_np}
        if NUMBA_KERNELS:
            NUMBA_KERNELS[name](*inputs)  # compile outside the timing
            t_nb, out_nb = _best(NUMBA_KERNELS[name], inputs, args.repeat)
            diff = float(np.max(np.abs(out_np - out_nb)))
            row.update(numba_s=t_nb, speedup=t_np / t_nb, max_abs_diff=diff)
            print(f"{name:<20} {desc:<16} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}  {diff:.1e}")
        else:
            print(f"{name:<20} {desc:<16} {t_np:10.4f} {'-':>10} {'-':>8}")
        rows.append(row)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()

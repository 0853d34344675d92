#!/usr/bin/env python3
"""Benchmark the numba kernel lane against the pure-numpy fallback.

Both lanes share one packed-parameter layout, so each operation runs on
identical inputs. The train loop is where the engine spends its time during
updates, so that is the number that matters.

Usage:
    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --widths 8 32 64 --batch 64 --output bench.json
"""

import argparse
import json
import time

import numpy as np

from driftlearn.kernels import OPT_ADAM, numpy_lane

try:
    from driftlearn.kernels import numba_lane
    NUMBA_AVAILABLE = True
except ImportError:
    numba_lane = None
    NUMBA_AVAILABLE = False


def packed_net(rng, widths):
    layers = list(zip(widths, widths[1:]))
    in_sizes = np.array([a for a, _ in layers], dtype=np.int64)
    out_sizes = np.array([b for _, b in layers], dtype=np.int64)
    acts = np.array([numpy_lane.ACT_TANH] * (len(layers) - 1) + [numpy_lane.ACT_LINEAR],
                    dtype=np.int64)
    w_offs = np.zeros(len(layers), dtype=np.int64)
    b_offs = np.zeros(len(layers), dtype=np.int64)
    off = 0
    for k, (a, b) in enumerate(layers):
        w_offs[k] = off
        off += a * b
        b_offs[k] = off
        off += b
    u_offs = np.zeros(len(layers) + 1, dtype=np.int64)
    np.cumsum(out_sizes, out=u_offs[1:])
    params = rng.uniform(-0.5, 0.5, off)
    return params, (in_sizes, out_sizes, acts, w_offs, b_offs, u_offs)


def time_call(fn, repeats):
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def bench_case(width, batch, epochs, repeats):
    rng = np.random.default_rng(0)
    widths = [width, 2 * width, width // 2 or 1, 1]
    params, meta = packed_net(rng, widths)
    x = np.ascontiguousarray(rng.random((width, batch)))
    y = np.ascontiguousarray(rng.random((1, batch)))
    order = np.stack([rng.permutation(batch) for _ in range(epochs)]).astype(np.int64)
    zeros = np.zeros_like(params)
    grads = np.empty_like(params)

    def make_ops(lane):
        buf = lane.forward_collect(params, *meta, x)
        return {
            "forward": lambda: lane.forward(params, *meta[:5], x),
            "backward": lambda: lane.loss_and_backward(params, *meta, x, y, buf, grads),
            "fisher": lambda: lane.fisher_diag(params, *meta, x, y),
            "train": lambda: lane.train_loop(params.copy(), *meta, x, y, order, 32,
                                             OPT_ADAM, 1e-3, 0.9, 0.999, 1e-8,
                                             zeros, zeros, 0.0),
        }

    rows = []
    numpy_ops = make_ops(numpy_lane)
    numba_ops = make_ops(numba_lane) if NUMBA_AVAILABLE else {}
    for op, fn in numpy_ops.items():
        numpy_t = time_call(fn, repeats)
        if NUMBA_AVAILABLE:
            numba_ops[op]()  # warm the JIT before timing
            numba_t = time_call(numba_ops[op], repeats)
        else:
            numba_t = float("inf")
        rows.append({
            "op": op, "width": width, "batch": batch,
            "numpy_us": numpy_t * 1e6, "numba_us": numba_t * 1e6,
            "speedup": numpy_t / numba_t if numba_t > 0 else 0.0,
        })
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--widths", type=int, nargs="+", default=[8, 16, 32, 64])
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--epochs", type=int, default=20,
                        help="epochs per train_loop call")
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--output", help="write results as JSON")
    args = parser.parse_args()

    print(f"numba available: {NUMBA_AVAILABLE}")
    if not NUMBA_AVAILABLE:
        print("only the numpy lane will be timed (set up numba for the comparison)")
    print(f"batch={args.batch}, train epochs={args.epochs}, repeats={args.repeats}\n")
    header = f"{'op':<10}{'width':>7}{'numpy (us)':>14}{'numba (us)':>14}{'speedup':>10}"
    print(header)
    print("-" * len(header))

    results = []
    for width in args.widths:
        for row in bench_case(width, args.batch, args.epochs, args.repeats):
            results.append(row)
            print(f"{row['op']:<10}{row['width']:>7}{row['numpy_us']:>14.1f}"
                  f"{row['numba_us']:>14.1f}{row['speedup']:>9.1f}x")
        print()

    if NUMBA_AVAILABLE:
        train_rows = [r for r in results if r["op"] == "train"]
        mean_speedup = float(np.mean([r["speedup"] for r in train_rows]))
        print(f"mean train-loop speedup: {mean_speedup:.1f}x")

    if args.output:
        with open(args.output, "w") as fh:
            json.dump(results, fh, indent=2)
        print(f"results written to {args.output}")


if __name__ == "__main__":
    main()

"""Time the numpy and numba kernels on problem sizes from the bundled data.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Shapes: 104 lag samples x 10 delays, 10 hidden units (121 parameters),
and a 461-step closed-loop rollout. The first numba call includes JIT
compilation and is reported separately.
"""

import argparse
import time

import numpy as np

from narcast import _kernels
from narcast.network import init_network
from narcast.pipeline import bundled_data_text
from narcast.resample import monthly_to_weekly
from narcast.series import parse_monthly_csv
from narcast.trainer import TrainingConfig, build_lag_dataset, random_split, train_levenberg_marquardt


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_backend(name, ds, net, repeat):
    fwd = getattr(_kernels, f"forward_batch_{name}")
    jac = getattr(_kernels, f"jacobian_{name}")
    roll = getattr(_kernels, f"rollout_{name}")
    args = (net.input_weights, net.hidden_biases, net.output_weights, net.output_bias)
    window = net.norm.denormalize(ds.inputs[-1])
    lo, hi = net.norm.raw_min, net.norm.raw_max

    t0 = time.perf_counter()
    fwd(*args, ds.inputs, 0, 1)
    jac(*args, ds.inputs, 0, 1)
    roll(*args, 0, 1, window, 461, lo, hi)
    first = time.perf_counter() - t0

    rows = {
        "first call (all three)": first,
        "forward_batch": best_of(lambda: fwd(*args, ds.inputs, 0, 1), repeat),
        "jacobian": best_of(lambda: jac(*args, ds.inputs, 0, 1), repeat),
        "rollout 461": best_of(lambda: roll(*args, 0, 1, window, 461, lo, hi), repeat),
    }

    saved = {k: getattr(_kernels, k) for k in ("forward_batch", "jacobian", "rollout")}
    for k in saved:
        setattr(_kernels, k, getattr(_kernels, f"{k}_{name}"))
    try:
        split = random_split(len(ds), seed=1)
        rows["full LM training"] = best_of(
            lambda: train_levenberg_marquardt(ds, split, TrainingConfig(), init_network(10, 10, 1)),
            max(1, repeat // 20))
    finally:
        for k, v in saved.items():
            setattr(_kernels, k, v)
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200, help="timing repeats, best is kept (default: 200)")
    args = parser.parse_args()

    weekly = monthly_to_weekly(parse_monthly_csv(bundled_data_text()))
    ds = build_lag_dataset(weekly, 10)
    net = init_network(10, 10, 1, norm=ds.source_scale)

    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    results = {b: bench_backend(b, ds, net, args.repeat) for b in backends}

    print(f"{'kernel':<24}" + "".join(f"{b:>14}" for b in backends)
          + ("   speedup" if len(backends) == 2 else ""))
    for key in results["numpy"]:
        line = f"{key:<24}" + "".join(f"{results[b][key] * 1e3:>11.3f} ms" for b in backends)
        if len(backends) == 2 and key != "first call (all three)":
            line += f"  {results['numpy'][key] / results['numba'][key]:>7.1f}x"
        print(line)
    if not _kernels.HAVE_NUMBA:
        print("numba not installed: only the numpy backend was timed")


if __name__ == "__main__":
    main()

"""Compare the compiled and numpy kernel backends.

Times each kernel on MFCC-sized inputs and a full 10-iteration generation on
a 200 ms chunk, once per backend. Usage::

    python benchmarks/bench_backends.py [--repeats N] [--csv out.csv]
"""
import argparse
import csv
import statistics
import sys
import time

import numpy as np

from mfccshield import kernels
from mfccshield.attack import AttackConfig, generate_noise
from mfccshield.mfcc import hamming
from mfccshield.synth import speech_like


def timed(fn, repeats):
    fn()
    runs = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        runs.append((time.perf_counter() - t0) * 1e6)
    return statistics.median(runs)


def cases():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 16000)
    w = hamming(400)
    frames = np.ascontiguousarray(rng.uniform(-1, 1, (79, 400)))
    ref = rng.integers(0, 50, 40)
    hyp = rng.integers(0, 50, 40)
    chunk = speech_like(0.2, seed=1)
    return {
        "preemphasis 1 s": lambda: kernels.preemphasis(x, 0.97),
        "preemphasis_adjoint 1 s": lambda: kernels.preemphasis_adjoint(x, 0.97),
        "frame_window 79x400": lambda: kernels.frame_window(x, 79, 200, w),
        "overlap_add 79x400": lambda: kernels.overlap_add(frames, 200, 16000, w),
        "edit_distance 40x40": lambda: kernels.edit_distance(ref, hyp),
        "generate_noise 200 ms x10": lambda: generate_noise(chunk, attack_cfg=AttackConfig(iterations=10)),
        "generate_noise masked x10": lambda: generate_noise(
            chunk, attack_cfg=AttackConfig(iterations=10, use_masking=True)),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--csv")
    args = parser.parse_args(argv)

    names = sorted(kernels.BACKENDS)
    if "cython" not in names:
        print("compiled extension not built; timing the numpy backend only", file=sys.stderr)
    table = {}
    for name in names:
        with kernels.backend(name):
            for case, fn in cases().items():
                table.setdefault(case, {})[name] = timed(fn, args.repeats)

    header = f"{'case':<28}" + "".join(f"{n + ' us':>14}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for case, row in table.items():
        line = f"{case:<28}" + "".join(f"{row[n]:>14.1f}" for n in names)
        if len(names) == 2:
            line += f"{row['python'] / row['cython']:>9.1f}x"
        print(line)

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["case", *[f"{n}_us" for n in names]])
            for case, row in table.items():
                writer.writerow([case, *[f"{row[n]:.2f}" for n in names]])


if __name__ == "__main__":
    main()

"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--samples 200] [--repeat 5]

Each kernel is timed on both backends with identical inputs, outputs are
checked for equality, then end-to-end generation throughput is measured at
64 px line height.
"""
import argparse
import random
import sys
import time
import timeit

import numpy as np

from vrdforge import config, kernels, pipeline
from vrdforge.augment import gaussian_kernel_q16


def kernel_cases():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (100, 1600, 2), dtype=np.int64).astype(np.int32)
    weights = gaussian_kernel_q16(2.0)
    src = rng.integers(0, 256, (96, 800, 3), dtype=np.uint8)
    yy, xx = np.mgrid[0:96, 0:800]
    map_x = (xx * 256 + rng.integers(-900, 900, xx.shape)).astype(np.int32)
    map_y = (yy * 256 + rng.integers(-900, 900, yy.shape)).astype(np.int32)
    r = random.Random(0)
    pairs = [([r.randrange(30) for _ in range(r.randint(0, 80))], [r.randrange(30) for _ in range(r.randint(1, 80))])
             for _ in range(50)]
    return {
        f"convolve {img.shape} x {len(weights)} taps": lambda: kernels.convolve_separable(img, weights),
        f"remap clamp {src.shape}": lambda: kernels.remap_bilinear(src, map_x, map_y),
        f"remap fill {src.shape}": lambda: kernels.remap_bilinear(src, map_x, map_y, fill=(255, 255, 255)),
        "edit_ops 50 pairs, len <= 80": lambda: [kernels.edit_ops(p, t) for p, t in pairs],
    }


def _same(a, b):
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def bench_kernels(repeat):
    backends = kernels.available_backends()
    for name, fn in kernel_cases().items():
        times, outs = {}, {}
        for b in backends:
            with kernels.use_backend(b):
                outs[b] = fn()
                times[b] = min(timeit.repeat(fn, number=1, repeat=repeat))
        ref = outs[backends[0]]
        same = all(_same(ref, o) for o in outs.values())
        row = "  ".join(f"{b} {times[b] * 1e3:9.2f} ms" for b in backends)
        speedup = f"  x{times['python'] / times['cython']:.1f}" if "cython" in times else ""
        print(f"{name:38s} {row}{speedup}  identical={same}")
        if not same:
            sys.exit(f"backends disagree on {name}")


def bench_pipeline(n):
    cfg = config.load_config()
    cfg.update(seed=1, n_samples=n)
    cfg["style"]["line_height"] = 64
    job = config.build_job(cfg)
    for b in kernels.available_backends():
        with kernels.use_backend(b):
            start = time.perf_counter()
            blobs = [pipeline.encode_record(s) for s in pipeline.SampleStream(job, 1)]
            elapsed = time.perf_counter() - start
        print(f"pipeline {b:7s} {n} samples in {elapsed:6.2f}s: {n / elapsed:6.1f} samples/s "
              f"({sum(map(len, blobs)) / n / 1024:.1f} KiB/record)")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200, help="samples for the end-to-end run")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"backends: {', '.join(kernels.available_backends())}")
    bench_kernels(args.repeat)
    bench_pipeline(args.samples)


if __name__ == "__main__":
    main()

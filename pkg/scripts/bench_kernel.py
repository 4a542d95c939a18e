#!/usr/bin/env python3
"""Kernel timing sweep across layer sizes.

Runs the bucket-table matmul and the dense float matmul over a grid of
square layer sizes and prints nanoseconds per matmul plus the ratio. Note
that in this NumPy implementation the dense path maps to BLAS while the
table path is a gather + reduction, so ratios here say nothing about what a
fixed-point hardware implementation would achieve.
"""

import argparse
import math
import time

import numpy as np

from clusterlut import CompressedLayer, build_bucket_lut, pack_indices
from clusterlut.lutkernel import QuantParams, lut_matmul, quantize_input


def time_one(size: int, k: int, bits: int, iters: int, seed: int):
    rng = np.random.default_rng(seed)
    centroids = np.sort(rng.standard_normal(k)).astype(np.float32)
    while len(np.unique(centroids)) < k:
        centroids = np.sort(rng.standard_normal(k)).astype(np.float32)
    idx = rng.integers(0, k, size=size * size)
    width = 4 if k <= 16 else 8
    layer = CompressedLayer(size, size, centroids, pack_indices(idx, width),
                            1.0, 1.0, bits)
    lut = build_bucket_lut(layer.centroids, layer.bits)
    q = quantize_input(rng.standard_normal(size),
                       QuantParams(layer.s_q, layer.s_m, layer.bits))
    w_dense = layer.reconstruct()

    def best_of(fn):
        best = math.inf
        for _ in range(iters):
            t0 = time.perf_counter_ns()
            fn()
            best = min(best, time.perf_counter_ns() - t0)
        return best

    t_lut = best_of(lambda: lut_matmul(q, layer, lut))
    t_dense = best_of(lambda: layer.s_q * (w_dense @ q.astype(np.float64)))
    return t_lut, t_dense


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="256,512,1024,2048")
    ap.add_argument("--centroids", type=int, default=8)
    ap.add_argument("--bits", type=int, default=8, choices=(4, 8))
    ap.add_argument("--iters", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print("size,lut_ns,dense_ns,lut_over_dense")
    for size in (int(s) for s in args.sizes.split(",")):
        t_lut, t_dense = time_one(size, args.centroids, args.bits,
                                  args.iters, args.seed)
        print(f"{size},{t_lut},{t_dense},{t_lut / t_dense:.2f}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""End-to-end demo on synthetic layers.

Generates one bundle from each synthetic family, runs the full compression
pipeline, and prints a comparison against the k-means and uniform-quantization
references plus a LUT-vs-reference agreement check.
"""

import argparse
import math

import numpy as np

from clusterlut import (HyperParams, build_bucket_lut, compress_bundle,
                        lut_forward, reference_forward)
from clusterlut.hessian import output_reconstruction_loss
from clusterlut.oracle import kmeans, uniform_quantize
from clusterlut.smooth import apply_smoothing
from clusterlut.synth import GENERATORS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=64)
    ap.add_argument("--cols", type=int, default=64)
    ap.add_argument("--samples", type=int, default=128)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-rounds", type=int, default=300)
    args = ap.parse_args()

    hyper = HyperParams(max_rounds=args.max_rounds)
    print("family,k,bits_equiv,recon_loss,kmeans_recon,uniform_recon,lut_dev")
    for name, gen in sorted(GENERATORS.items()):
        if name == "distinct":
            bundle = gen(args.rows, args.cols, args.samples, 4, args.seed)
        else:
            bundle = gen(args.rows, args.cols, args.samples, args.seed)
        layer, _, report = compress_bundle(bundle, hyper)

        smoothed = apply_smoothing(bundle, layer.s_m)
        w, x = smoothed.weights, smoothed.calib

        def recon(w_hat):
            e = x @ (w_hat - w).T
            return float((e * e).sum()) / (x.shape[0] * w.shape[0])

        km = kmeans(w.ravel(), layer.k, seed=args.seed)
        km_loss = recon(km.reconstruct().reshape(w.shape))
        uq_loss = recon(uniform_quantize(
            w, max(2, math.ceil(math.log2(layer.k)))))

        lut = build_bucket_lut(layer.centroids, layer.bits)
        dev = 0.0
        for row in bundle.calib[:8]:
            y_lut = lut_forward(row, layer, lut)
            y_ref = reference_forward(row, layer)
            scale = max(float(np.max(np.abs(y_ref))), 1e-30)
            dev = max(dev, float(np.max(np.abs(y_lut - y_ref))) / scale)

        print(f"{name},{report.k},{math.log2(report.k):.2f},"
              f"{report.recon_loss:.4e},{km_loss:.4e},{uq_loss:.4e},"
              f"{dev:.1e}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Pinned-centroid-count sweep.

For each K in a range, runs the optimizer with the count pinned (merging and
restarts disabled) and compares the weight-space MSE against the k-means
reference at the same K. Emits CSV to stdout.
"""

import argparse

import numpy as np

from clusterlut import HyperParams, LayerBundle, optimize_layer
from clusterlut.oracle import clustering_mse, kmeans


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=64)
    ap.add_argument("--cols", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-rounds", type=int, default=200)
    ap.add_argument("--counts", default="4,8,12,16",
                    help="comma-separated centroid counts")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    w = rng.standard_normal((args.rows, args.cols))
    # identity calibration: training loss proportional to weight MSE,
    # making the k-means comparison direct
    bundle = LayerBundle(w, np.eye(args.cols))
    hyper = HyperParams(max_rounds=args.max_rounds)

    print("k,mse,kmeans_mse,ratio")
    for k in (int(s) for s in args.counts.split(",")):
        cl, _ = optimize_layer(bundle, hyper, fixed_k=k)
        ours = clustering_mse(w.ravel(), cl)
        km = clustering_mse(w.ravel(), kmeans(w.ravel(), k, seed=0))
        print(f"{k},{ours:.6e},{km:.6e},{ours / km:.4f}")


if __name__ == "__main__":
    main()

"""Command-line surface.

Subcommands: compress, eval, bench, inspect, smooth-search, gen.
Hyperparameters come from an optional key=value config file, overridden by
flags; a single seed controls every source of randomness so runs are
bit-reproducible.  Exit codes: 0 success, 1 usage, 2 data error,
3 invariant violation.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import synth
from .core import (CompressedLayer, DataError, FormatError, HyperParams,
                   InvariantError, load_compressed_layer, load_layer_bundle,
                   pack_indices, save_compressed_layer, save_layer_bundle)
from .density_init import estimate_sigma, seed_extreme_clusters
from .hessian import output_reconstruction_loss
from .lutkernel import build_bucket_lut, lut_forward, quantize_input, \
    QuantParams, reference_forward
from .oracle import kmeans, uniform_quantize
from .pipeline import compress_bundle, trajectory_csv_lines
from .smooth import apply_smoothing, default_grid, quantization_mse, \
    search_smoothing
from .lutkernel import derive_activation_scale


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"bad config line: {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


_HYPER_KEYS = {
    "eta": float,
    "merge_threshold": float,
    "accept_ratio": float,
    "spec_rounds": int,
    "max_rounds": int,
    "bits": int,
    "plateau_window": int,
    "stabilize_window": int,
}


def _build_hyper(config: dict, args) -> HyperParams:
    values = {}
    for key, cast in _HYPER_KEYS.items():
        if key in config:
            values[key] = cast(config[key])
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    mults = config.get("eps_multipliers")
    if getattr(args, "eps_multipliers", None):
        mults = args.eps_multipliers
    if mults:
        values["eps_multipliers"] = tuple(
            float(m) for m in str(mults).split(","))
    if getattr(args, "raw_centroid_offset", False):
        values["raw_centroid_offset"] = True
    if getattr(args, "transposed_merge_weights", False):
        values["transposed_merge_weights"] = True
    return HyperParams(**values)


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value hyperparameter file")
    p.add_argument("--eta", type=float)
    p.add_argument("--merge-threshold", dest="merge_threshold", type=float)
    p.add_argument("--accept-ratio", dest="accept_ratio", type=float)
    p.add_argument("--spec-rounds", dest="spec_rounds", type=int)
    p.add_argument("--max-rounds", dest="max_rounds", type=int)
    p.add_argument("--bits", type=int)
    p.add_argument("--plateau-window", dest="plateau_window", type=int)
    p.add_argument("--stabilize-window", dest="stabilize_window", type=int)
    p.add_argument("--eps-multipliers", dest="eps_multipliers",
                   help="comma-separated radius multipliers for restarts")
    p.add_argument("--raw-centroid-offset", action="store_true",
                   help="skip count-normalization of centroid offsets")
    p.add_argument("--transposed-merge-weights", action="store_true",
                   help="cross-weighted form of the centroid merge")


def _read_manifest(path: str) -> list[Path]:
    lines = Path(path).read_text().splitlines()
    entries = [Path(s.strip()) for s in lines if s.strip()
               and not s.strip().startswith("#")]
    base = Path(path).parent
    out = []
    for e in entries:
        p = e if e.is_absolute() else base / e
        if not p.exists():
            raise DataError(f"manifest entry not found: {p}")
        out.append(p)
    return out


def cmd_gen(args) -> int:
    kind = args.kind
    if kind == "distinct":
        bundle = synth.distinct_values_bundle(args.rows, args.cols,
                                              args.samples, args.k, args.seed)
    elif kind == "outlier":
        bundle = synth.outlier_bundle(args.rows, args.cols, args.samples,
                                      args.seed)
    elif kind == "gaussian":
        bundle = synth.gaussian_bundle(args.rows, args.cols, args.samples,
                                       args.seed)
    else:
        raise DataError(f"unknown generator {kind!r}")
    save_layer_bundle(bundle, args.out)
    print(f"wrote {args.out} ({bundle.rows}x{bundle.cols}, "
          f"{bundle.n_samples} calib rows)")
    return 0


def cmd_compress(args) -> int:
    config = _load_config(args.config)
    hyper = _build_hyper(config, args)
    paths = _read_manifest(args.manifest)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    header = "layer,k,equivalent_bits,cluster_metric,recon_loss"
    print(header)
    failures = 0
    for path in paths:
        try:
            bundle = load_layer_bundle(path)
            layer, trajectory, report = compress_bundle(
                bundle, hyper, fixed_k=args.fixed_k)
            stem = path.stem
            save_compressed_layer(layer, outdir / f"{stem}.lcl")
            (outdir / f"{stem}_trajectory.csv").write_text(
                "\n".join(trajectory_csv_lines(trajectory)) + "\n")
            print(f"{stem},{report.k},{math.log2(report.k):.3f},"
                  f"{report.cluster_metric:.9e},{report.recon_loss:.9e}")
        except (DataError, FormatError, InvariantError) as exc:
            failures += 1
            print(f"{path.stem},FAILED,{exc}", file=sys.stderr)
    return 2 if failures else 0


def cmd_eval(args) -> int:
    paths = _read_manifest(args.manifest)
    comp_dir = Path(args.compressed)
    print("layer,k,recon_loss,kmeans_recon_loss,uniform_recon_loss,"
          "lut_max_rel_dev")
    for path in paths:
        bundle = load_layer_bundle(path)
        layer = load_compressed_layer(comp_dir / f"{path.stem}.lcl")
        smoothed = apply_smoothing(bundle, layer.s_m)
        w = smoothed.weights
        x = smoothed.calib

        def recon_loss(w_hat):
            e = x @ (w_hat - w).T
            return float((e * e).sum()) / (x.shape[0] * w.shape[0])

        ours = recon_loss(layer.reconstruct())
        km = kmeans(w.ravel(), layer.k, seed=args.seed)
        km_loss = recon_loss(km.reconstruct().reshape(w.shape))
        bits = max(2, math.ceil(math.log2(layer.k)))
        uq_loss = recon_loss(uniform_quantize(w, bits))

        lut = build_bucket_lut(layer.centroids, layer.bits)
        dev = 0.0
        for row in bundle.calib[:min(8, bundle.n_samples)]:
            y_lut = lut_forward(row, layer, lut)
            y_ref = reference_forward(row, layer)
            scale = max(float(np.max(np.abs(y_ref))), 1e-30)
            dev = max(dev, float(np.max(np.abs(y_lut - y_ref))) / scale)
        print(f"{path.stem},{layer.k},{ours:.9e},{km_loss:.9e},"
              f"{uq_loss:.9e},{dev:.3e}")
    return 0


def cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    k = args.centroids
    centroids = np.sort(rng.standard_normal(k)).astype(np.float32)
    while len(np.unique(centroids)) < k:
        centroids = np.sort(rng.standard_normal(k)).astype(np.float32)
    n = args.rows * args.cols
    idx = rng.integers(0, k, size=n)
    width = 4 if k <= 16 else 8
    layer = CompressedLayer(args.rows, args.cols, centroids,
                            pack_indices(idx, width), 1.0, 1.0, args.bits)
    lut = build_bucket_lut(layer.centroids, layer.bits)
    params = QuantParams(layer.s_q, layer.s_m, layer.bits)
    w_dense = layer.reconstruct()
    xs = [rng.standard_normal(args.cols) for _ in range(args.batch)]
    qs = [quantize_input(x, params) for x in xs]

    from .lutkernel import lut_matmul

    def time_loop(fn):
        best = math.inf
        for _ in range(args.iters):
            t0 = time.perf_counter_ns()
            for item in range(args.batch):
                fn(item)
            best = min(best, (time.perf_counter_ns() - t0) / args.batch)
        return best

    t_lut = time_loop(lambda i: lut_matmul(qs[i], layer, lut))
    t_naive = time_loop(
        lambda i: layer.s_q * (w_dense @ qs[i].astype(np.float64)))
    print("kernel,ns_per_matmul,ratio_vs_naive")
    print(f"lut,{t_lut:.0f},{t_naive / t_lut:.4f}")
    print(f"naive,{t_naive:.0f},1.0000")
    return 0


def cmd_inspect(args) -> int:
    path = Path(args.file)
    head = path.read_bytes()[:4]
    if head == b"LCDB":
        bundle = load_layer_bundle(path)
        w = bundle.weights.ravel()
        print(f"layer bundle: rows={bundle.rows} cols={bundle.cols} "
              f"n_samples={bundle.n_samples}")
        print(f"weights: min={w.min():.6g} max={w.max():.6g} "
              f"rms={np.sqrt(np.mean(w ** 2)):.6g}")
        if (w > 0).any() and (w < 0).any():
            sigma = estimate_sigma(w)
            _, _, params = seed_extreme_clusters(w, sigma)
            print(f"density params: sigma={params.sigma:.6g} "
                  f"min_pts={params.min_pts} eps={params.eps:.6g}")
    elif head == b"LCDC":
        layer = load_compressed_layer(path)
        print(f"compressed layer: rows={layer.rows} cols={layer.cols} "
              f"k={layer.k} bits={layer.bits} index_width={layer.index_width}")
        print(f"s_m={layer.s_m:.6g} s_q={layer.s_q:.6g}")
        print("centroids: " + " ".join(f"{c:.6g}" for c in layer.centroids))
    else:
        raise FormatError(f"unrecognized magic {head!r}")
    return 0


def cmd_smooth_search(args) -> int:
    bundle = load_layer_bundle(args.bundle)
    grid = default_grid(bundle.calib, args.bits)
    s_q = derive_activation_scale(bundle.calib, args.bits)
    print("s_m,mse")
    for s in grid:
        print(f"{s:.9e},{quantization_mse(bundle.calib, s, s_q, args.bits):.9e}")
    best, mse = search_smoothing(bundle.calib, args.bits, grid)
    print(f"# selected s_m={best:.9e} mse={mse:.9e}", file=sys.stderr)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="clusterlut")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic layer bundle")
    p.add_argument("--kind", required=True,
                   choices=sorted(synth.GENERATORS))
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("compress", help="compress every layer in a manifest")
    p.add_argument("manifest")
    p.add_argument("--outdir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixed-k", dest="fixed_k", type=int,
                   help="pin the centroid count, disabling merges")
    _add_hyper_flags(p)
    p.set_defaults(fn=cmd_compress)

    p = sub.add_parser("eval", help="compare against oracle baselines")
    p.add_argument("manifest")
    p.add_argument("--compressed", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("bench", help="time the LUT kernel vs a dense matmul")
    p.add_argument("--rows", type=int, default=1024)
    p.add_argument("--cols", type=int, default=1024)
    p.add_argument("--centroids", type=int, default=8)
    p.add_argument("--bits", type=int, default=8, choices=(4, 8))
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--iters", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("inspect", help="dump a .lbf or .lcl file")
    p.add_argument("file")
    p.set_defaults(fn=cmd_inspect)

    p = sub.add_parser("smooth-search",
                       help="print the smoothing MSE curve as CSV")
    p.add_argument("bundle")
    p.add_argument("--bits", type=int, default=8, choices=(4, 8))
    p.set_defaults(fn=cmd_smooth_search)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (FormatError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

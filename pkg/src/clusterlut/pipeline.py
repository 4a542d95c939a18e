"""Per-layer compression pipeline: smoothing search, clustering
optimization, scale derivation and packaging into a CompressedLayer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CompressedLayer, HyperParams, LayerBundle, pack_indices
from .cluster_opt import TrajectoryRow, optimize_layer
from .hessian import clustering_loss, compute_hessian_diag, \
    output_reconstruction_loss
from .lutkernel import derive_activation_scale
from .smooth import apply_smoothing, search_smoothing


@dataclass
class LayerReport:
    """Summary numbers for one compressed layer."""

    rows: int
    cols: int
    k: int
    s_m: float
    s_q: float
    cluster_metric: float
    recon_loss: float


def compress_bundle(bundle: LayerBundle, hyper: HyperParams,
                    fixed_k: int | None = None):
    """Run the full pipeline on one bundle.

    Returns (CompressedLayer, trajectory rows, LayerReport).  The clustering
    operates on the smoothed weights; the recorded scales let inference undo
    the smoothing implicitly.
    """
    s_m, _ = search_smoothing(bundle.calib, hyper.bits)
    s_q = derive_activation_scale(bundle.calib, hyper.bits)
    smoothed = apply_smoothing(bundle, s_m)
    clustering, trajectory = optimize_layer(smoothed, hyper, fixed_k=fixed_k)

    h = compute_hessian_diag(smoothed.calib)
    metric = clustering_loss(smoothed, clustering, h)
    recon = output_reconstruction_loss(smoothed, clustering)

    # float32 storage may collapse near-identical centroids; remap indices
    c32 = clustering.centroids.astype(np.float32)
    uniq, inverse = np.unique(c32, return_inverse=True)
    assignment = inverse[clustering.assignment]
    width = 4 if len(uniq) <= 16 else 8
    layer = CompressedLayer(
        rows=bundle.rows, cols=bundle.cols,
        centroids=uniq,
        packed_indices=pack_indices(assignment, width),
        s_m=s_m, s_q=s_q, bits=hyper.bits)
    report = LayerReport(bundle.rows, bundle.cols, clustering.k,
                         s_m, s_q, metric, recon)
    return layer, trajectory, report


def trajectory_csv_lines(trajectory: list[TrajectoryRow]) -> list[str]:
    lines = ["round,centroid_count,cluster_metric,recon_loss,phase"]
    for r in trajectory:
        lines.append(f"{r.round},{r.centroid_count},{r.cluster_metric:.9e},"
                     f"{r.recon_loss:.9e},{r.phase}")
    return lines

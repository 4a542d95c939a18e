"""Diagonal curvature estimate from calibration activations and the two
losses driving distillation: the curvature-weighted clustering metric and
the layer-output reconstruction error.
"""

from __future__ import annotations

import numpy as np

from .core import Clustering, HessianDiag, LayerBundle

DAMPING_FRACTION = 0.01
DAMPING_FLOOR = 1e-8


def compute_hessian_diag(calib) -> HessianDiag:
    """Per-column curvature 2 * sum_s x[s,j]^2 of the layer-output squared
    error, dampened by 0.01 * mean (floor 1e-8) so later divisions are safe."""
    x = np.asarray(calib, dtype=np.float64)
    raw = 2.0 * np.einsum("sj,sj->j", x, x)
    damping = max(DAMPING_FRACTION * float(raw.mean()), DAMPING_FLOOR)
    diag = raw + damping
    return HessianDiag(diag, float(diag.sum()))


def clustering_loss(bundle: LayerBundle, clustering: Clustering,
                    h: HessianDiag) -> float:
    """Curvature-weighted L1 clustering error: sum_ij H_jj |W_ij - C| / 2.

    Zero exactly when every weight equals its centroid; used as the
    approximation-quality signal that triggers merges.
    """
    err = np.abs(bundle.weights.ravel() - clustering.reconstruct())
    per_row = err.reshape(bundle.rows, bundle.cols) @ (h.diag / 2.0)
    return float(per_row.sum())


def output_reconstruction_loss(bundle: LayerBundle,
                               clustering: Clustering) -> float:
    """||X W'^T - X W^T||_F^2 / (n_samples * rows)."""
    delta = clustering.reconstruct().reshape(bundle.rows, bundle.cols) \
        - bundle.weights
    e = bundle.calib @ delta.T
    return float(np.einsum("sr,sr->", e, e)) / (bundle.n_samples * bundle.rows)

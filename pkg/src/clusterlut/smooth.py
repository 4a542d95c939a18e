"""Adaptive per-layer smoothing.

A single scalar s_m is chosen per layer by minimizing the post-quantization
MSE of the calibration activations.  The quantization grid is pinned to the
unsmoothed calibration scale (s_q = max|X| / (2^{b-1} - 1)), so s_m acts as
a range/resolution trade-off: s_m < 1 clips the rare outliers while giving
the bulk a finer effective step of s_m * s_q.  The factor is folded into the
teacher weights (W <- s_m W, X <- X / s_m), which leaves the exact layer
output unchanged.
"""

from __future__ import annotations

import numpy as np

from .core import DataError, LayerBundle
from .lutkernel import derive_activation_scale

GRID_POINTS = 33
GRID_SPAN = 16.0


def quantization_mse(calib, s_m: float, s_q: float, bits: int) -> float:
    """MSE between X and the round trip clip(round(X / (s_m s_q))) s_m s_q."""
    x = np.asarray(calib, dtype=np.float64)
    lo, hi = -2 ** (bits - 1), 2 ** (bits - 1) - 1
    q = np.clip(np.rint(x / (s_m * s_q)), lo, hi)
    return float(np.mean((x - q * s_m * s_q) ** 2))


def default_grid(calib, bits: int) -> np.ndarray:
    """Geometric grid of candidate factors around the natural scale."""
    peak = float(np.max(np.abs(calib)))
    if peak == 0.0:
        return np.array([1.0])
    lo = peak / (2 ** (bits - 1) - 1) / GRID_SPAN
    return np.geomspace(lo, peak * GRID_SPAN, GRID_POINTS)


def search_smoothing(calib, bits: int, grid=None) -> tuple[float, float]:
    """Return the grid candidate minimizing post-quantization MSE and its
    MSE.  Ties break toward the smaller candidate."""
    if grid is None:
        grid = default_grid(calib, bits)
    grid = np.asarray(grid, dtype=np.float64)
    if len(grid) == 0:
        raise DataError("empty smoothing grid")
    if np.any(grid <= 0):
        raise DataError("smoothing candidates must be positive")
    x = np.asarray(calib, dtype=np.float64)
    if np.max(np.abs(x)) == 0.0:
        return float(np.min(grid)), 0.0
    s_q = derive_activation_scale(x, bits)
    best_s, best_mse = None, np.inf
    for s in sorted(grid):
        mse = quantization_mse(x, s, s_q, bits)
        if mse < best_mse:
            best_s, best_mse = float(s), mse
    return best_s, best_mse


def apply_smoothing(bundle: LayerBundle, s_m: float) -> LayerBundle:
    """Fold the factor into the bundle: weights scaled up, activations
    scaled down, exact product (X / s_m)(s_m W)^T unchanged."""
    if s_m <= 0:
        raise DataError("smoothing factor must be positive")
    return LayerBundle(bundle.weights * s_m, bundle.calib / s_m)

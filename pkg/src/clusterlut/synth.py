"""Synthetic layer bundles for desk-scale verification.

Three families: plain Gaussian weights, Gaussian activations with a few
injected outliers (the hard case for activation quantization), and weights
drawn from exactly k distinct values (exactly representable by k centroids).
"""

from __future__ import annotations

import numpy as np

from .core import DataError, LayerBundle


def gaussian_bundle(rows: int, cols: int, n_samples: int,
                    seed: int = 0) -> LayerBundle:
    rng = np.random.default_rng(seed)
    return LayerBundle(rng.standard_normal((rows, cols)),
                       rng.standard_normal((n_samples, cols)))


def outlier_bundle(rows: int, cols: int, n_samples: int, seed: int = 0,
                   n_outliers: int = 2, magnitude: float = 10.0
                   ) -> LayerBundle:
    """Gaussian weights and activations, plus a handful of large-magnitude
    activation entries that wreck a max-scaled quantization grid."""
    rng = np.random.default_rng(seed)
    calib = rng.standard_normal((n_samples, cols))
    flat = calib.ravel()
    spots = rng.choice(flat.size, size=n_outliers, replace=False)
    signs = rng.choice([-1.0, 1.0], size=n_outliers)
    flat[spots] = signs * magnitude * (1.0 + 0.05 * rng.random(n_outliers))
    return LayerBundle(rng.standard_normal((rows, cols)), calib)


def distinct_values_bundle(rows: int, cols: int, n_samples: int, k: int,
                           seed: int = 0) -> LayerBundle:
    """Weights take exactly k distinct values, symmetric around zero.

    Level placement and occupancy are chosen so a density scan resolves
    every level: inner levels carry almost all the mass (occupancy decays
    8x per step outward), so the scan's density floor — derived from the
    lightly-populated extreme levels — stays below every level's count,
    and the extreme levels sit an extra gap away from their neighbors so
    the seed radius never swallows a second level.
    """
    if k < 2:
        raise DataError("need at least two distinct values")
    n = rows * cols
    half = k // 2
    magnitudes = np.arange(1, half + 1, dtype=np.float64)
    magnitudes[-1] += 1.0  # widen the extreme gap past the seed radius
    side = np.concatenate([-magnitudes[::-1], magnitudes])
    if k % 2:
        side = np.concatenate([side[:half], [0.0], side[half:]])
    occupancy = 8.0 ** -(np.abs(side) - 1.0)
    counts = np.maximum(2, np.floor(occupancy / occupancy.sum() * n)) \
        .astype(np.int64)
    counts[np.argmax(occupancy)] += n - counts.sum()
    if counts.min() < 2 or counts.sum() != n:
        raise DataError("layer too small to host all distinct values")
    values = np.repeat(side, counts)
    rng = np.random.default_rng(seed)
    rng.shuffle(values)
    return LayerBundle(values.reshape(rows, cols),
                       rng.standard_normal((n_samples, cols)))


GENERATORS = {
    "gaussian": gaussian_bundle,
    "outlier": outlier_bundle,
    "distinct": distinct_values_bundle,
}

"""Multiplication-free inference path.

Inputs are smoothed and quantized in one combined step, then every output
element is a sum of precomputed centroid-times-index table entries.  The
table stores only non-negative indices (one extra column covers the
asymmetric endpoint |-2^(b-1)|); the accumulation applies signs instead of
holding a mirrored table, halving its footprint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CompressedLayer, DataError, InvariantError


@dataclass(frozen=True)
class QuantParams:
    """Combined smooth+quantize transform: q = clip(round(x * combined))."""

    s_q: float
    s_m: float
    bits: int

    def __post_init__(self):
        if self.s_q <= 0 or self.s_m <= 0:
            raise InvariantError("scales must be positive")
        if self.bits not in (4, 8):
            raise InvariantError("bits must be 4 or 8")

    @property
    def combined(self) -> float:
        return 1.0 / (self.s_m * self.s_q)

    @property
    def q_min(self) -> int:
        return -(2 ** (self.bits - 1))

    @property
    def q_max(self) -> int:
        return 2 ** (self.bits - 1) - 1


@dataclass(frozen=True)
class BucketLUT:
    """Per-centroid rows of centroid * m for m in 0 .. 2^(b-1)."""

    table: np.ndarray  # (K, 2^(b-1) + 1) float32
    bits: int


def derive_activation_scale(calib, bits: int) -> float:
    """s_q = max|calib| / (2^(b-1) - 1); falls back to 1 for all-zero data."""
    peak = float(np.max(np.abs(np.asarray(calib, dtype=np.float64))))
    if peak == 0.0:
        return 1.0
    return peak / (2 ** (bits - 1) - 1)


def quantize_input(x, params: QuantParams) -> np.ndarray:
    """clip(round(x / (s_m s_q))) with round-half-to-even."""
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise DataError("non-finite input")
    q = np.rint(x * params.combined)
    return np.clip(q, params.q_min, params.q_max).astype(np.int64)


def build_bucket_lut(centroids, bits: int) -> BucketLUT:
    """K buckets of 2^(b-1)+1 entries, entry[k][m] = centroids[k] * m."""
    c = np.asarray(centroids, dtype=np.float32)
    if len(c) < 1:
        raise InvariantError("need at least one centroid")
    m = np.arange(2 ** (bits - 1) + 1, dtype=np.float32)
    return BucketLUT(np.outer(c, m), bits)


def lut_matmul(q, layer: CompressedLayer, lut: BucketLUT,
               accumulate64: bool = False) -> np.ndarray:
    """y_r = s_q * sum_j sign(q_j) * lut[index(r, j)][|q_j|].

    The accumulation loop performs only table reads, sign handling and
    additions: positive-index and negative-index contributions are summed
    separately and differenced, then the single s_q scaling is applied per
    output element.
    """
    q = np.asarray(q, dtype=np.int64)
    if q.shape != (layer.cols,):
        raise DataError(f"input length {q.shape} != cols {layer.cols}")
    if np.abs(q).max(initial=0) >= lut.table.shape[1]:
        raise InvariantError("quantized index out of table range")
    idx = layer.indices().reshape(layer.rows, layer.cols)
    gathered = lut.table[idx, np.abs(q)[None, :]]
    if accumulate64:
        gathered = gathered.astype(np.float64)
    pos = gathered[:, q > 0].sum(axis=1)
    neg = gathered[:, q < 0].sum(axis=1)
    return layer.s_q * (pos - neg)


def reference_forward(x, layer: CompressedLayer) -> np.ndarray:
    """Semantic ground truth: quantize the input, then a dense float matmul
    against the reconstructed smoothed weights, scaled by s_q."""
    params = QuantParams(layer.s_q, layer.s_m, layer.bits)
    q = quantize_input(np.asarray(x, dtype=np.float64), params)
    w = layer.reconstruct()
    return layer.s_q * (w @ q.astype(np.float64))


def lut_forward(x, layer: CompressedLayer, lut: BucketLUT | None = None
                ) -> np.ndarray:
    """End-to-end path: combined transform then bucket-table accumulation."""
    if lut is None:
        lut = build_bucket_lut(layer.centroids, layer.bits)
    params = QuantParams(layer.s_q, layer.s_m, layer.bits)
    q = quantize_input(np.asarray(x, dtype=np.float64), params)
    return lut_matmul(q, layer, lut)

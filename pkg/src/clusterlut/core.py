"""Domain types and bit-exact file I/O for layer bundles and compressed layers.

File formats (little-endian throughout, reals as IEEE-754 float32):

  layer bundle (.lbf):
    magic b"LCDB", u8 version=1, u32 rows, u32 cols, u32 n_samples,
    rows*cols f32 weights (row-major), n_samples*cols f32 activations.

  compressed layer (.lcl):
    magic b"LCDC", u8 version=1, u32 rows, u32 cols, u8 bits, u8 index_width,
    u16 K, f32 s_m, f32 s_q, K f32 centroids (ascending), packed index bytes.

Indices are packed 4-bit (first index in the low nibble, odd count padded
with a zero nibble) when K <= 16, else one byte per index.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

BUNDLE_MAGIC = b"LCDB"
COMPRESSED_MAGIC = b"LCDC"
FORMAT_VERSION = 1


class FormatError(Exception):
    """File does not parse: bad magic, bad version, truncated payload."""


class DataError(Exception):
    """Parsed values violate basic validity (non-finite, bad ranges)."""


class InvariantError(Exception):
    """A domain-type invariant does not hold."""


@dataclass(frozen=True)
class LayerBundle:
    """One layer's full-precision weights plus calibration activations."""

    weights: np.ndarray  # (rows, cols) float
    calib: np.ndarray  # (n_samples, cols) float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        x = np.asarray(self.calib, dtype=np.float64)
        if w.ndim != 2:
            raise InvariantError("weights must be a 2-D matrix")
        if x.ndim != 2 or x.shape[0] < 1:
            raise InvariantError("calib must be a non-empty 2-D matrix")
        if x.shape[1] != w.shape[1]:
            raise InvariantError(
                f"calib has {x.shape[1]} columns, weights have {w.shape[1]}"
            )
        if not (np.isfinite(w).all() and np.isfinite(x).all()):
            raise DataError("non-finite value in bundle")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "calib", x)

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]

    @property
    def n_samples(self) -> int:
        return self.calib.shape[0]


@dataclass
class Clustering:
    """Centroid values plus per-weight assignments; the student's weights.

    ``shadow`` carries the continuous per-weight value the distillation loop
    updates between reclassifications.  Mutable only during one layer's
    optimization (single writer).
    """

    centroids: np.ndarray  # (K,) float64, strictly increasing
    assignment: np.ndarray  # flat (n_weights,) integer indices into centroids
    counts: np.ndarray  # (K,) int64
    shadow: np.ndarray  # flat (n_weights,) float64

    def validate(self) -> None:
        c = self.centroids
        if c.ndim != 1 or len(c) == 0:
            raise InvariantError("centroids must be a non-empty vector")
        if not np.all(np.diff(c) > 0):
            raise InvariantError("centroids must be strictly increasing")
        if self.counts.sum() != len(self.assignment):
            raise InvariantError("counts do not sum to the number of weights")
        bc = np.bincount(self.assignment, minlength=len(c))
        if len(bc) > len(c) or not np.array_equal(bc, self.counts):
            raise InvariantError("counts inconsistent with assignment")
        if np.any(self.counts < 1):
            raise InvariantError("empty cluster")
        if len(self.shadow) != len(self.assignment):
            raise InvariantError("shadow length mismatch")

    @property
    def k(self) -> int:
        return len(self.centroids)

    def reconstruct(self) -> np.ndarray:
        """Per-weight reconstructed value centroids[assignment]."""
        return self.centroids[self.assignment]

    def copy(self) -> "Clustering":
        return Clustering(
            self.centroids.copy(),
            self.assignment.copy(),
            self.counts.copy(),
            self.shadow.copy(),
        )


def make_clustering(weights_flat: np.ndarray, centroids: np.ndarray,
                    assignment: np.ndarray) -> Clustering:
    """Build a valid Clustering, merging duplicate centroid values.

    Centroids must arrive sorted (not necessarily strictly); exact ties are
    merged so the strictly-increasing invariant holds.
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    assignment = np.asarray(assignment)
    keep, inverse = np.unique(centroids, return_inverse=True)
    assignment = inverse[assignment]
    counts = np.bincount(assignment, minlength=len(keep)).astype(np.int64)
    if np.any(counts < 1):
        # drop centroids nothing maps to
        used = counts > 0
        remap = np.cumsum(used) - 1
        keep = keep[used]
        assignment = remap[assignment]
        counts = counts[used]
    cl = Clustering(keep, assignment.astype(np.int64), counts,
                    np.asarray(weights_flat, dtype=np.float64).copy())
    cl.validate()
    return cl


@dataclass(frozen=True)
class HessianDiag:
    """Per-input-column diagonal curvature approximation."""

    diag: np.ndarray  # (cols,) positive after damping
    trace: float

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=np.float64)
        if np.any(d < 0):
            raise InvariantError("negative Hessian diagonal entry")
        t = float(d.sum())
        if abs(self.trace - t) > 1e-9 * max(abs(t), 1.0):
            raise InvariantError("trace does not match diagonal sum")
        object.__setattr__(self, "diag", d)


@dataclass(frozen=True)
class HyperParams:
    """All tunables of the outer optimization loop."""

    eta: float = 0.1  # step size; curvature preconditioning makes it scale-free
    merge_threshold: float = 0.05  # fraction of the per-count initial metric
    accept_ratio: float = 1.05  # relative loss bound for restarts, >= 1
    spec_rounds: int = 30  # distill rounds granted to a speculative restart
    max_rounds: int = 2000  # total training round limit
    bits: int = 8  # activation bit-width
    eps_multipliers: tuple = (2.0, 1.5)
    plateau_window: int = 5
    stabilize_window: int = 50  # rounds without a merge before speculating
    raw_centroid_offset: bool = False  # skip count-normalizing centroid offsets
    transposed_merge_weights: bool = False  # cross-weighted centroid merge

    def __post_init__(self):
        if self.eta <= 0:
            raise InvariantError("eta must be positive")
        if self.merge_threshold <= 0:
            raise InvariantError("merge_threshold must be positive")
        if self.accept_ratio < 1.0:
            raise InvariantError("accept_ratio must be >= 1")
        if self.spec_rounds < 1 or self.max_rounds < 0:
            raise InvariantError("round counts out of range")
        if self.bits not in (4, 8):
            raise InvariantError("bits must be 4 or 8")


@dataclass(frozen=True)
class CompressedLayer:
    """Final artifact: centroids, packed indices, smoothing and scale."""

    rows: int
    cols: int
    centroids: np.ndarray  # (K,) float32 ascending, smoothed-weight domain
    packed_indices: bytes
    s_m: float
    s_q: float
    bits: int

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float32)
        if len(c) == 0 or len(c) > 256:
            raise InvariantError("centroid count out of range [1, 256]")
        if not np.all(np.diff(c.astype(np.float64)) > 0):
            raise InvariantError("centroids must be strictly increasing")
        if self.s_m <= 0 or self.s_q <= 0:
            raise InvariantError("s_m and s_q must be positive")
        if self.bits not in (4, 8):
            raise InvariantError("bits must be 4 or 8")
        n = self.rows * self.cols
        expected = (n + 1) // 2 if self.index_width == 4 else n
        if len(self.packed_indices) != expected:
            raise InvariantError("packed index length mismatch")
        object.__setattr__(self, "centroids", c)

    @property
    def k(self) -> int:
        return len(self.centroids)

    @property
    def index_width(self) -> int:
        return 4 if len(self.centroids) <= 16 else 8

    def indices(self) -> np.ndarray:
        idx = unpack_indices(self.packed_indices, self.index_width,
                             self.rows * self.cols)
        if len(idx) and idx.max() >= self.k:
            raise InvariantError("index out of centroid range")
        return idx

    def reconstruct(self) -> np.ndarray:
        """Materialize the (rows, cols) smoothed-domain weight matrix."""
        return self.centroids.astype(np.float64)[self.indices()].reshape(
            self.rows, self.cols)


def pack_indices(indices, width: int) -> bytes:
    """Pack small integers into bytes; width 4 puts the first index in the
    low nibble and zero-pads an odd count."""
    idx = np.asarray(indices, dtype=np.int64)
    if width == 8:
        if len(idx) and (idx.min() < 0 or idx.max() > 255):
            raise DataError("index out of range for 8-bit packing")
        return idx.astype(np.uint8).tobytes()
    if width != 4:
        raise DataError(f"unsupported index width {width}")
    if len(idx) and (idx.min() < 0 or idx.max() > 15):
        raise DataError("index out of range for 4-bit packing")
    if len(idx) % 2:
        idx = np.concatenate([idx, [0]])
    lo = idx[0::2]
    hi = idx[1::2]
    return ((hi << 4) | lo).astype(np.uint8).tobytes()


def unpack_indices(data: bytes, width: int, n: int) -> np.ndarray:
    """Inverse of pack_indices for the first n indices."""
    raw = np.frombuffer(data, dtype=np.uint8)
    if width == 8:
        if len(raw) < n:
            raise FormatError("truncated index payload")
        return raw[:n].astype(np.int64)
    if width != 4:
        raise DataError(f"unsupported index width {width}")
    if len(raw) < (n + 1) // 2:
        raise FormatError("truncated index payload")
    out = np.empty(2 * len(raw), dtype=np.int64)
    out[0::2] = raw & 0x0F
    out[1::2] = raw >> 4
    return out[:n]


_BUNDLE_HEADER = struct.Struct("<4sBIII")
_COMPRESSED_HEADER = struct.Struct("<4sBIIBBHff")


def save_layer_bundle(bundle: LayerBundle, path) -> None:
    with open(path, "wb") as f:
        f.write(_BUNDLE_HEADER.pack(BUNDLE_MAGIC, FORMAT_VERSION,
                                    bundle.rows, bundle.cols,
                                    bundle.n_samples))
        f.write(bundle.weights.astype("<f4").tobytes())
        f.write(bundle.calib.astype("<f4").tobytes())


def load_layer_bundle(path) -> LayerBundle:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _BUNDLE_HEADER.size:
        raise FormatError("file too short for bundle header")
    magic, version, rows, cols, n_samples = _BUNDLE_HEADER.unpack_from(data)
    if magic != BUNDLE_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")
    need = _BUNDLE_HEADER.size + 4 * (rows * cols + n_samples * cols)
    if len(data) != need:
        raise FormatError(f"payload length {len(data)} != expected {need}")
    off = _BUNDLE_HEADER.size
    w = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=off)
    off += 4 * rows * cols
    x = np.frombuffer(data, dtype="<f4", count=n_samples * cols, offset=off)
    if not (np.isfinite(w).all() and np.isfinite(x).all()):
        raise DataError("non-finite value in bundle payload")
    return LayerBundle(w.reshape(rows, cols).astype(np.float64),
                       x.reshape(n_samples, cols).astype(np.float64))


def save_compressed_layer(layer: CompressedLayer, path) -> None:
    with open(path, "wb") as f:
        f.write(_COMPRESSED_HEADER.pack(
            COMPRESSED_MAGIC, FORMAT_VERSION, layer.rows, layer.cols,
            layer.bits, layer.index_width, layer.k,
            np.float32(layer.s_m), np.float32(layer.s_q)))
        f.write(layer.centroids.astype("<f4").tobytes())
        f.write(layer.packed_indices)


def load_compressed_layer(path) -> CompressedLayer:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _COMPRESSED_HEADER.size:
        raise FormatError("file too short for compressed header")
    (magic, version, rows, cols, bits, index_width, k,
     s_m, s_q) = _COMPRESSED_HEADER.unpack_from(data)
    if magic != COMPRESSED_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")
    if index_width not in (4, 8) or (index_width == 4) != (k <= 16):
        raise FormatError("index width inconsistent with centroid count")
    n = rows * cols
    n_packed = (n + 1) // 2 if index_width == 4 else n
    need = _COMPRESSED_HEADER.size + 4 * k + n_packed
    if len(data) != need:
        raise FormatError(f"payload length {len(data)} != expected {need}")
    off = _COMPRESSED_HEADER.size
    centroids = np.frombuffer(data, dtype="<f4", count=k, offset=off)
    if not np.isfinite(centroids).all():
        raise DataError("non-finite centroid")
    packed = data[off + 4 * k:]
    layer = CompressedLayer(rows, cols, centroids.copy(), packed,
                            float(s_m), float(s_q), bits)
    layer.indices()  # raises if any index exceeds K
    return layer

"""Domain types, index packing and bit-exact file round trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterlut import (CompressedLayer, Clustering, DataError, FormatError,
                        HyperParams, InvariantError, LayerBundle,
                        load_compressed_layer, load_layer_bundle, pack_indices,
                        save_compressed_layer, save_layer_bundle,
                        unpack_indices)
from clusterlut.core import make_clustering


# ---------------------------------------------------------------- packing

@given(st.lists(st.integers(0, 15), max_size=200))
def test_pack_unpack_4bit_roundtrip(idx):
    packed = pack_indices(idx, 4)
    assert len(packed) == (len(idx) + 1) // 2
    out = unpack_indices(packed, 4, len(idx))
    assert np.array_equal(out, np.asarray(idx, dtype=np.int64))


@given(st.lists(st.integers(0, 255), max_size=200))
def test_pack_unpack_8bit_roundtrip(idx):
    packed = pack_indices(idx, 8)
    assert len(packed) == len(idx)
    out = unpack_indices(packed, 8, len(idx))
    assert np.array_equal(out, np.asarray(idx, dtype=np.int64))


def test_pack_4bit_low_nibble_first():
    assert pack_indices([1, 2], 4) == bytes([0x21])
    assert pack_indices([1], 4) == bytes([0x01])  # odd count zero-padded


def test_pack_rejects_out_of_range():
    with pytest.raises(DataError):
        pack_indices([16], 4)
    with pytest.raises(DataError):
        pack_indices([-1], 8)
    with pytest.raises(DataError):
        pack_indices([256], 8)


def test_unpack_truncated_payload_raises():
    with pytest.raises(FormatError):
        unpack_indices(b"\x00", 8, 2)
    with pytest.raises(FormatError):
        unpack_indices(b"", 4, 1)


# ---------------------------------------------------------------- LayerBundle

def test_bundle_shape_validation():
    with pytest.raises(InvariantError):
        LayerBundle(np.zeros(4), np.zeros((2, 4)))
    with pytest.raises(InvariantError):
        LayerBundle(np.zeros((2, 4)), np.zeros((2, 3)))
    with pytest.raises(InvariantError):
        LayerBundle(np.zeros((2, 4)), np.zeros((0, 4)))


def test_bundle_rejects_non_finite():
    w = np.zeros((2, 2))
    w[0, 0] = np.nan
    with pytest.raises(DataError):
        LayerBundle(w, np.zeros((1, 2)))


def test_bundle_properties(small_bundle):
    assert small_bundle.rows == 8
    assert small_bundle.cols == 8
    assert small_bundle.n_samples == 16


# ---------------------------------------------------------------- Clustering

def test_make_clustering_merges_duplicate_centroids():
    w = np.array([0.0, 1.0, 1.0, 2.0])
    cl = make_clustering(w, [0.0, 1.0, 1.0, 2.0], [0, 1, 2, 3])
    assert cl.k == 3
    assert np.array_equal(cl.counts, [1, 2, 1])
    cl.validate()


def test_make_clustering_drops_unreferenced_centroids():
    w = np.array([0.0, 2.0])
    cl = make_clustering(w, [0.0, 1.0, 2.0], [0, 2])
    assert cl.k == 2
    assert np.allclose(cl.centroids, [0.0, 2.0])


def test_validate_rejects_inconsistent_counts():
    cl = make_clustering(np.arange(4.0), [0.0, 2.0], [0, 0, 1, 1])
    cl.counts[0] = 3
    with pytest.raises(InvariantError):
        cl.validate()


def test_validate_rejects_non_increasing_centroids():
    cl = make_clustering(np.arange(4.0), [0.0, 2.0], [0, 0, 1, 1])
    cl.centroids[1] = -1.0
    with pytest.raises(InvariantError):
        cl.validate()


def test_clustering_copy_is_deep():
    cl = make_clustering(np.arange(4.0), [0.0, 2.0], [0, 0, 1, 1])
    cp = cl.copy()
    cp.centroids[0] = 99.0
    assert cl.centroids[0] == 0.0


def test_reconstruct_indexes_centroids():
    cl = make_clustering(np.arange(4.0), [0.0, 2.0], [0, 1, 0, 1])
    assert np.array_equal(cl.reconstruct(), [0.0, 2.0, 0.0, 2.0])


# ---------------------------------------------------------------- HyperParams

@pytest.mark.parametrize("kwargs", [
    {"eta": 0.0}, {"eta": -1.0}, {"merge_threshold": 0.0},
    {"accept_ratio": 0.9}, {"spec_rounds": 0}, {"max_rounds": -1},
    {"bits": 3},
])
def test_hyperparams_validation(kwargs):
    with pytest.raises(InvariantError):
        HyperParams(**kwargs)


def test_hyperparams_defaults_construct():
    h = HyperParams()
    assert h.bits in (4, 8)
    assert h.accept_ratio >= 1.0


# ---------------------------------------------------------------- file I/O

def test_bundle_file_roundtrip_bit_exact(tmp_path, small_bundle):
    p = tmp_path / "b.lbf"
    save_layer_bundle(small_bundle, p)
    again = load_layer_bundle(p)
    # storage is float32; round-tripping the loaded copy must be exact
    save_layer_bundle(again, tmp_path / "b2.lbf")
    assert p.read_bytes() == (tmp_path / "b2.lbf").read_bytes()
    assert again.weights.shape == small_bundle.weights.shape
    assert np.allclose(again.weights, small_bundle.weights, atol=1e-6)


def test_bundle_load_rejects_bad_magic(tmp_path):
    p = tmp_path / "bad.lbf"
    p.write_bytes(b"XXXX" + bytes(13))
    with pytest.raises(FormatError):
        load_layer_bundle(p)


def test_bundle_load_rejects_truncation(tmp_path, small_bundle):
    p = tmp_path / "b.lbf"
    save_layer_bundle(small_bundle, p)
    p.write_bytes(p.read_bytes()[:-1])
    with pytest.raises(FormatError):
        load_layer_bundle(p)


def test_bundle_load_rejects_bad_version(tmp_path, small_bundle):
    p = tmp_path / "b.lbf"
    save_layer_bundle(small_bundle, p)
    data = bytearray(p.read_bytes())
    data[4] = 99
    p.write_bytes(bytes(data))
    with pytest.raises(FormatError):
        load_layer_bundle(p)


def _layer(k=4, rows=3, cols=5):
    rng = np.random.default_rng(0)
    centroids = np.sort(rng.standard_normal(k)).astype(np.float32)
    idx = rng.integers(0, k, size=rows * cols)
    width = 4 if k <= 16 else 8
    return CompressedLayer(rows, cols, centroids, pack_indices(idx, width),
                           0.5, 0.01, 8)


def test_compressed_file_roundtrip_bit_exact(tmp_path):
    layer = _layer()
    p = tmp_path / "l.lcl"
    save_compressed_layer(layer, p)
    again = load_compressed_layer(p)
    save_compressed_layer(again, tmp_path / "l2.lcl")
    assert p.read_bytes() == (tmp_path / "l2.lcl").read_bytes()
    assert again.k == layer.k
    assert again.packed_indices == layer.packed_indices
    assert np.array_equal(again.centroids, layer.centroids)


def test_compressed_uses_8bit_indices_above_16_centroids(tmp_path):
    layer = _layer(k=20)
    assert layer.index_width == 8
    p = tmp_path / "l.lcl"
    save_compressed_layer(layer, p)
    assert load_compressed_layer(p).index_width == 8


def test_compressed_load_rejects_index_out_of_range(tmp_path):
    layer = _layer(k=4)
    p = tmp_path / "l.lcl"
    save_compressed_layer(layer, p)
    data = bytearray(p.read_bytes())
    data[-1] = 0xFF  # index 15 >= k=4
    p.write_bytes(bytes(data))
    with pytest.raises(InvariantError):
        load_compressed_layer(p)


def test_compressed_load_rejects_inconsistent_width(tmp_path):
    layer = _layer(k=4)
    p = tmp_path / "l.lcl"
    save_compressed_layer(layer, p)
    data = bytearray(p.read_bytes())
    data[15] = 8  # index_width byte: claims 8-bit with k<=16
    p.write_bytes(bytes(data))
    with pytest.raises(FormatError):
        load_compressed_layer(p)


def test_compressed_layer_validation():
    with pytest.raises(InvariantError):
        CompressedLayer(1, 2, np.array([0.0, 0.0], dtype=np.float32),
                        b"\x00", 1.0, 1.0, 8)
    with pytest.raises(InvariantError):
        CompressedLayer(1, 2, np.array([0.0, 1.0], dtype=np.float32),
                        b"\x00", -1.0, 1.0, 8)
    with pytest.raises(InvariantError):
        CompressedLayer(1, 2, np.array([0.0, 1.0], dtype=np.float32),
                        b"\x00\x00", 1.0, 1.0, 8)  # wrong packed length

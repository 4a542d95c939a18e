"""Synthetic bundle generators."""

import numpy as np
import pytest

from clusterlut import DataError
from clusterlut.synth import (GENERATORS, distinct_values_bundle,
                              gaussian_bundle, outlier_bundle)


def test_generator_registry():
    assert set(GENERATORS) == {"gaussian", "outlier", "distinct"}


def test_gaussian_shapes_and_determinism():
    a = gaussian_bundle(4, 6, 10, seed=7)
    b = gaussian_bundle(4, 6, 10, seed=7)
    assert a.weights.shape == (4, 6)
    assert a.calib.shape == (10, 6)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.calib, b.calib)
    c = gaussian_bundle(4, 6, 10, seed=8)
    assert not np.array_equal(a.weights, c.weights)


def test_outlier_bundle_injects_large_entries():
    bundle = outlier_bundle(4, 32, 64, seed=0, n_outliers=2, magnitude=10.0)
    flat = np.abs(bundle.calib.ravel())
    assert (flat >= 10.0).sum() == 2
    # the rest stays in a plausible Gaussian range
    assert np.sort(flat)[-3] < 6.0


@pytest.mark.parametrize("k", [2, 3, 4, 8])
def test_distinct_values_exact_count(k):
    bundle = distinct_values_bundle(24, 24, 16, k, seed=1)
    values = np.unique(bundle.weights)
    assert len(values) == k
    # symmetric levels; a middle zero level appears only for odd k
    assert np.allclose(values, -values[::-1])
    assert (0.0 in values) == (k % 2 == 1)


def test_distinct_values_extremes_are_lightest():
    bundle = distinct_values_bundle(24, 24, 16, 8, seed=0)
    values, counts = np.unique(bundle.weights, return_counts=True)
    inner = counts[np.argmin(np.abs(values))]
    extreme = counts[np.argmax(np.abs(values))]
    assert extreme < inner
    assert counts.min() >= 2


def test_distinct_values_rejects_k_below_two():
    with pytest.raises(DataError):
        distinct_values_bundle(4, 4, 4, 1)


def test_distinct_values_rejects_tiny_layers():
    with pytest.raises(DataError):
        distinct_values_bundle(2, 2, 4, 8)  # 4 weights cannot host 8 values


def test_distinct_values_deterministic_per_seed():
    a = distinct_values_bundle(8, 8, 4, 4, seed=3)
    b = distinct_values_bundle(8, 8, 4, 4, seed=3)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.calib, b.calib)

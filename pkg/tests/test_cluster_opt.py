"""Outer loop: merge rule, merge/restart triggers and optimize_layer."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterlut import HyperParams, InvariantError, LayerBundle, \
    merge_closest, optimize_layer
from clusterlut.cluster_opt import OptState, detect_nonmonotonic, should_merge
from clusterlut.core import make_clustering
from clusterlut.oracle import clustering_mse, kmeans


def _clustering(centroids, counts):
    values = np.repeat(centroids, counts)
    assignment = np.repeat(np.arange(len(centroids)), counts)
    return make_clustering(values, np.asarray(centroids, float), assignment)


def test_merge_weighted_mean_matches_hand_value():
    cl = _clustering([1.0, 2.0], [3, 1])
    out = merge_closest(cl)
    assert np.allclose(out.centroids, [1.25])  # (3*1 + 1*2)/4


def test_merge_transposed_weights_matches_hand_value():
    cl = _clustering([1.0, 2.0], [3, 1])
    out = merge_closest(cl, transposed_weights=True)
    assert np.allclose(out.centroids, [1.75])  # (1*1 + 3*2)/4


def test_merge_equal_counts_is_midpoint_both_ways():
    cl = _clustering([1.0, 2.0], [2, 2])
    assert np.allclose(merge_closest(cl).centroids, [1.5])
    cl = _clustering([1.0, 2.0], [2, 2])
    assert np.allclose(
        merge_closest(cl, transposed_weights=True).centroids, [1.5])


def test_merge_picks_smallest_gap():
    cl = _clustering([0.0, 0.4, 2.0], [1, 1, 1])
    out = merge_closest(cl)
    assert out.k == 2
    assert np.allclose(out.centroids, [0.2, 2.0])


def test_merge_gap_tie_breaks_to_smaller_combined_count():
    cl = _clustering([0.0, 1.0, 2.0], [5, 1, 1])  # gaps equal; right pair lighter
    out = merge_closest(cl)
    assert np.allclose(out.centroids, [0.0, 1.5])


def test_merge_needs_two_centroids():
    with pytest.raises(InvariantError):
        merge_closest(_clustering([1.0], [3]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 500))
def test_merge_preserves_membership_total(seed):
    rng = np.random.default_rng(seed)
    k = rng.integers(2, 6)
    centroids = np.sort(rng.standard_normal(k))
    counts = rng.integers(1, 10, size=k)
    cl = _clustering(np.unique(centroids), counts[:len(np.unique(centroids))])
    total = cl.counts.sum()
    out = merge_closest(cl)
    out.validate()
    assert out.k == cl.k - 1
    assert out.counts.sum() == total


def test_should_merge_threshold_and_exact_zero():
    cl = _clustering([0.0, 1.0], [1, 1])
    state = OptState(cl)
    state.metric_at_count = 10.0
    state.loss_history = [0.6]
    assert not should_merge(state, 0.05)
    state.loss_history = [0.4]
    assert should_merge(state, 0.05)
    state.metric_at_count = 0.0
    state.loss_history = [0.0]
    assert should_merge(state, 0.05)


def test_should_merge_requires_history():
    state = OptState(_clustering([0.0, 1.0], [1, 1]))
    with pytest.raises(InvariantError):
        should_merge(state, 0.05)


def test_detect_nonmonotonic():
    state = OptState(_clustering([0.0, 1.0], [1, 1]))
    state.loss_history = [3.0, 2.0, 1.0]
    assert not detect_nonmonotonic(state, 3)
    state.loss_history = [1.0, 2.0, 3.0]
    assert not detect_nonmonotonic(state, 3)
    state.loss_history = [1.0, 1.0, 1.0]
    assert not detect_nonmonotonic(state, 3)
    state.loss_history = [1.0, 3.0, 2.0]
    assert detect_nonmonotonic(state, 3)
    with pytest.raises(InvariantError):
        detect_nonmonotonic(state, 5)


def test_optimize_layer_fixed_k_pins_count():
    rng = np.random.default_rng(0)
    bundle = LayerBundle(rng.standard_normal((16, 16)), np.eye(16))
    hyper = HyperParams(max_rounds=50)
    cl, trajectory = optimize_layer(bundle, hyper, fixed_k=8)
    assert cl.k == 8
    assert all(row.phase in ("init", "fixed") for row in trajectory)
    assert trajectory[-1].round <= hyper.max_rounds


def test_optimize_layer_fixed_k_competitive_with_kmeans():
    rng = np.random.default_rng(1)
    bundle = LayerBundle(rng.standard_normal((16, 16)), np.eye(16))
    cl, _ = optimize_layer(bundle, HyperParams(max_rounds=100), fixed_k=8)
    ours = clustering_mse(bundle.weights.ravel(), cl)
    km = clustering_mse(bundle.weights.ravel(),
                        kmeans(bundle.weights.ravel(), 8))
    assert ours <= 1.5 * km


def test_optimize_layer_exact_values_collapse_to_exact_centroids():
    values = np.repeat([-2.0, 2.0], 32).astype(np.float64)
    rng = np.random.default_rng(2)
    rng.shuffle(values)
    bundle = LayerBundle(values.reshape(8, 8), rng.standard_normal((16, 8)))
    cl, _ = optimize_layer(bundle, HyperParams(max_rounds=100))
    assert cl.k == 2
    assert np.allclose(np.sort(cl.centroids), [-2.0, 2.0])


def test_optimize_layer_zero_rounds_returns_initialization():
    rng = np.random.default_rng(3)
    bundle = LayerBundle(rng.standard_normal((8, 8)),
                         rng.standard_normal((16, 8)))
    cl, trajectory = optimize_layer(bundle, HyperParams(max_rounds=0))
    cl.validate()
    assert len(trajectory) == 1
    assert trajectory[0].phase == "init"


def test_trajectory_rounds_never_exceed_budget():
    rng = np.random.default_rng(4)
    bundle = LayerBundle(rng.standard_normal((8, 8)),
                         rng.standard_normal((4, 8)))
    hyper = HyperParams(max_rounds=40, stabilize_window=5)
    _, trajectory = optimize_layer(bundle, hyper)
    # a speculative restart in flight may overrun by its own round budget
    overrun = len(hyper.eps_multipliers) * hyper.spec_rounds
    assert max(row.round for row in trajectory) <= 40 + overrun

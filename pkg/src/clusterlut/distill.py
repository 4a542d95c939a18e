"""One distillation round over a clustered layer.

Each round updates the continuous shadow weights with a curvature-
preconditioned gradient step on the output reconstruction error, moves
weights whose accumulated displacement crosses the half-gap to a
neighboring centroid (one hop per round), and offsets each centroid by the
summed increments of its members.
"""

from __future__ import annotations

import numpy as np

from .core import Clustering, HessianDiag, LayerBundle, make_clustering


def reconstruction_gradient(bundle: LayerBundle,
                            clustering: Clustering) -> np.ndarray:
    """Gradient of ||X W'^T - X W^T||_F^2 w.r.t. the reconstructed weights,
    G = 2 E^T X with E = X (W' - W)^T.  Flat, same layout as assignment."""
    delta = clustering.reconstruct().reshape(bundle.rows, bundle.cols) \
        - bundle.weights
    e = bundle.calib @ delta.T  # (n_samples, rows)
    return (2.0 * e.T @ bundle.calib).ravel()


def distill_step(bundle: LayerBundle, clustering: Clustering,
                 h: HessianDiag, eta: float) -> np.ndarray:
    """Apply dw = -eta * G / diag(H) to the shadow weights.

    Returns the per-weight update; assignments and centroids are untouched.
    """
    g = reconstruction_gradient(bundle, clustering)
    dw = (-eta * g.reshape(bundle.rows, bundle.cols) / h.diag).ravel()
    clustering.shadow += dw
    return dw


def boundary_distances(centroids) -> tuple[np.ndarray, np.ndarray]:
    """Half-gaps to the neighboring centroids; missing sides are +inf."""
    c = np.asarray(centroids, dtype=np.float64)
    gaps = np.diff(c) / 2.0
    d_left = np.concatenate([[np.inf], gaps])
    d_right = np.concatenate([gaps, [np.inf]])
    return d_left, d_right


def reclassify(clustering: Clustering, dw: np.ndarray) -> np.ndarray:
    """Move each weight whose update crosses a half-gap one cluster over.

    dw < -d_left moves left, dw > d_right moves right; at most one hop.
    Returns the indices of moved weights; counts are kept consistent.
    """
    d_left, d_right = boundary_distances(clustering.centroids)
    a = clustering.assignment
    go_left = dw < -d_left[a]
    go_right = dw > d_right[a]
    moved = np.flatnonzero(go_left | go_right)
    if len(moved):
        step = go_right.astype(np.int64) - go_left.astype(np.int64)
        np.subtract.at(clustering.counts, a[moved], 1)
        a[moved] += step[moved]
        np.add.at(clustering.counts, a[moved], 1)
    return moved


def update_centroids(clustering: Clustering, dw: np.ndarray,
                     moved: np.ndarray, prev_assignment: np.ndarray,
                     prev_centroids: np.ndarray,
                     normalize: bool = True) -> Clustering:
    """Offset each centroid by the summed increments of its members.

    Weights that stayed contribute dw; weights that arrived from a neighbor
    contribute (C_old - C_new) + dw, i.e. their displacement expressed
    relative to the receiving centroid.  The summed offset is divided by the
    receiving cluster's count unless ``normalize`` is False (the raw summed
    form scales centroid motion with cluster size).  Ties created by the
    update are merged, restoring the strictly-increasing invariant.
    """
    k = clustering.k
    offsets = np.zeros(k)
    contrib = dw.copy()
    if len(moved):
        contrib[moved] += prev_centroids[prev_assignment[moved]] \
            - clustering.centroids[clustering.assignment[moved]]
    np.add.at(offsets, clustering.assignment, contrib)
    if normalize:
        # emptied clusters keep a zero offset and are dropped on rebuild
        np.divide(offsets, clustering.counts, out=offsets,
                  where=clustering.counts > 0)
    new_centroids = clustering.centroids + offsets
    order = np.argsort(new_centroids, kind="stable")
    remap = np.empty(k, dtype=np.int64)
    remap[order] = np.arange(k)
    return make_clustering(clustering.shadow, new_centroids[order],
                           remap[clustering.assignment])


def distill_round(bundle: LayerBundle, clustering: Clustering,
                  h: HessianDiag, eta: float,
                  normalize_offsets: bool = True,
                  integrate_drift: bool = True) -> Clustering:
    """distill_step + reclassify + update_centroids, returning the new
    Clustering (shadow weights carried over).

    With ``integrate_drift`` (the default, used by the progressive loop)
    reclassification is driven by the shadow's cumulative offset from its
    reconstructed value, so small gradient steps add up across rounds and a
    weight migrates whenever sustained pressure on the reconstruction error
    carries it past the half-gap — this is what lets weights trade
    weight-space proximity for error the calibration data can actually
    observe when there are fewer samples than columns.

    With ``integrate_drift=False`` (pinned-count refinement) the hop test
    uses the round's full preconditioned step -G/diag(H), independent of
    eta.  When the calibration columns are orthogonal that step equals the
    weight's distance to its centroid, so reclassification reduces to
    nearest-centroid reassignment and repeated rounds behave like 1-D
    Lloyd refinement under the curvature weighting, with a stable fixed
    point.

    Centroid offsets always use only the current round's increments,
    keeping centroid motion a bounded preconditioned step.
    """
    dw_round = distill_step(bundle, clustering, h, eta)
    if integrate_drift:
        drift = clustering.shadow - clustering.reconstruct()
    else:
        drift = dw_round / eta
    prev_assignment = clustering.assignment.copy()
    prev_centroids = clustering.centroids.copy()
    moved = reclassify(clustering, drift)
    return update_centroids(clustering, dw_round, moved, prev_assignment,
                            prev_centroids, normalize=normalize_offsets)

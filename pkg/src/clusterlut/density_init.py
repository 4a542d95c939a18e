"""Density-based centroid initialization for scalar weight distributions.

The scale sigma is estimated from signed tail percentiles, two seed clusters
grow around the extreme weights, the remaining points run through a 1-D
density scan (DBSCAN semantics over sorted order), and cluster medians become
the initial centroids.  Noise points are absorbed by their nearest centroid
so every weight owns an index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Clustering, DataError, make_clustering

# tail masses enclosed by 1, 2 and 3 standard deviations of a Gaussian
_TAIL_FRACTIONS = (0.6827, 0.9544, 0.9974)


@dataclass(frozen=True)
class DensityParams:
    """Derived neighborhood parameters: eps = eps_multiplier * sigma / min_pts."""

    sigma: float
    min_pts: int
    eps: float
    eps_multiplier: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0 or self.min_pts < 1 or self.eps <= 0:
            raise DataError("invalid density parameters")


def estimate_sigma(weights) -> float:
    """Scale estimate: mean of six signed tail-percentile magnitudes over 12.

    The k-sigma percentile of the positives is the value at rank
    ceil(f * n_pos) of the positives sorted ascending by magnitude, with
    f in {0.6827, 0.9544, 0.9974}; negatives contribute magnitudes the same
    way.  For an exact Gaussian the six values sit near 1, 2 and 3 sigma on
    each side, so the sum over 12 recovers sigma.
    """
    w = np.asarray(weights, dtype=np.float64).ravel()
    pos = np.sort(w[w > 0])
    neg = np.sort(-w[w < 0])
    if len(pos) == 0 or len(neg) == 0:
        raise DataError("sigma estimate needs both positive and negative weights")
    total = 0.0
    for side in (pos, neg):
        n = len(side)
        for f in _TAIL_FRACTIONS:
            rank = min(int(np.ceil(f * n)), n)
            total += side[rank - 1]
    return total / 12.0


def seed_extreme_clusters(weights, sigma: float, eps_multiplier: float = 1.0):
    """Grow two clusters within sigma of the extreme weights.

    Returns (cluster_a_indices, cluster_b_indices, DensityParams).  The
    max-side cluster skips points the min-side cluster already claimed; if
    that leaves it empty (the whole range fits in one sigma) the single seed
    cluster stands in for both when sizing MinPts.
    """
    w = np.asarray(weights, dtype=np.float64).ravel()
    lo, hi = w.min(), w.max()
    a = np.flatnonzero(w <= lo + sigma)
    b = np.flatnonzero(w >= hi - sigma)
    b = np.setdiff1d(b, a, assume_unique=True)
    min_pts = min(len(a), len(b)) if len(b) else len(a)
    eps = eps_multiplier * sigma / min_pts
    return a, b, DensityParams(sigma, min_pts, eps, eps_multiplier)


def run_density_scan(weights, visited, params: DensityParams):
    """DBSCAN over the unvisited points of a scalar sample.

    A point is core when its eps-neighborhood (among unvisited points,
    itself included) holds at least min_pts points.  Clusters grow from core
    points scanned in ascending weight order; unreachable points are noise.
    Returns (list of index arrays, noise index array) in original indexing.
    """
    w = np.asarray(weights, dtype=np.float64).ravel()
    active = np.flatnonzero(~np.asarray(visited, dtype=bool))
    if len(active) == 0:
        return [], np.empty(0, dtype=np.int64)
    order = active[np.argsort(w[active], kind="stable")]
    vals = w[order]
    n = len(vals)
    # neighborhood of i in sorted order is the index window [left[i], right[i])
    left = np.searchsorted(vals, vals - params.eps, side="left")
    right = np.searchsorted(vals, vals + params.eps, side="right")
    is_core = (right - left) >= params.min_pts

    # In 1-D the density-reachable set of a core point is a contiguous
    # interval (union of overlapping windows), so expansion is a two-pointer
    # sweep instead of a BFS over individual neighbors.
    labels = np.full(n, -1, dtype=np.int64)
    clusters: list[np.ndarray] = []
    for i in range(n):
        if labels[i] != -1 or not is_core[i]:
            continue
        cid = len(clusters)
        lo, hi = left[i], right[i]
        seg = labels[lo:hi]
        seg[seg == -1] = cid
        p = i
        while p < hi:
            if labels[p] == cid and is_core[p]:
                if left[p] < lo:
                    seg = labels[left[p]:lo]
                    seg[seg == -1] = cid
                    lo = left[p]
                if right[p] > hi:
                    seg = labels[hi:right[p]]
                    seg[seg == -1] = cid
                    hi = right[p]
            p += 1
        clusters.append(np.sort(order[np.flatnonzero(labels == cid)]))
    noise = order[np.flatnonzero(labels == -1)]
    return clusters, np.sort(noise)


def _median(values: np.ndarray) -> float:
    # midpoint of the two middle values for even cardinality
    return float(np.median(values))


def finalize_centroids(clusters, noise, weights) -> Clustering:
    """Turn index clusters into a Clustering: median centroids, noise points
    assigned to their nearest centroid, shadow initialized to the weights."""
    w = np.asarray(weights, dtype=np.float64).ravel()
    clusters = [np.asarray(c, dtype=np.int64) for c in clusters if len(c)]
    if not clusters:
        raise DataError("no clusters to finalize")
    centroids = np.array([_median(w[c]) for c in clusters])
    order = np.argsort(centroids, kind="stable")
    centroids = centroids[order]
    assignment = np.empty(len(w), dtype=np.int64)
    for new_id, old_id in enumerate(order):
        assignment[clusters[old_id]] = new_id
    noise = np.asarray(noise, dtype=np.int64)
    if len(noise):
        # nearest centroid; ties resolve to the left neighbor
        pos = np.searchsorted(centroids, w[noise])
        lo = np.clip(pos - 1, 0, len(centroids) - 1)
        hi = np.clip(pos, 0, len(centroids) - 1)
        pick = np.where(
            np.abs(w[noise] - centroids[lo]) <= np.abs(centroids[hi] - w[noise]),
            lo, hi)
        assignment[noise] = pick
    return make_clustering(w, centroids, assignment)


def density_init(weights, eps_multiplier: float = 1.0) -> Clustering:
    """Full initialization: sigma -> seed clusters -> density scan -> medians."""
    w = np.asarray(weights, dtype=np.float64).ravel()
    if len(w) == 0:
        raise DataError("empty weight vector")
    if np.ptp(w) == 0.0:
        return make_clustering(w, np.array([w[0]]),
                               np.zeros(len(w), dtype=np.int64))
    sigma = estimate_sigma(w)
    a, b, params = seed_extreme_clusters(w, sigma, eps_multiplier)
    visited = np.zeros(len(w), dtype=bool)
    visited[a] = True
    visited[b] = True
    clusters, noise = run_density_scan(w, visited, params)
    seed_clusters = [a] + ([b] if len(b) else [])
    return finalize_centroids(seed_clusters + clusters, noise, w)

"""Independent brute-force references for tests, acceptance checks and the
``eval`` command: 1-D k-means, dynamic-programming optimal clustering,
uniform quantization, dense matmul, rank percentiles and a quadratic
DBSCAN.  Clarity over speed throughout; several are O(n^2).
"""

from __future__ import annotations

import numpy as np

from .core import Clustering, DataError, make_clustering


def kmeans(weights, k: int, iters: int = 100, seed: int = 0) -> Clustering:
    """Lloyd's algorithm on scalar data with k-means++ style seeding."""
    w = np.asarray(weights, dtype=np.float64).ravel()
    distinct = np.unique(w)
    if k < 1 or k > len(distinct):
        raise DataError(f"k={k} outside [1, {len(distinct)} distinct values]")
    rng = np.random.default_rng(seed)
    centers = [distinct[rng.integers(len(distinct))]]
    for _ in range(k - 1):
        d2 = np.min((w[:, None] - np.asarray(centers)[None, :]) ** 2, axis=1)
        total = d2.sum()
        if total == 0:
            # remaining seeds drawn from unused distinct values
            unused = np.setdiff1d(distinct, centers)
            centers.append(unused[rng.integers(len(unused))])
            continue
        centers.append(w[rng.choice(len(w), p=d2 / total)])
    centers = np.sort(np.asarray(centers))
    for _ in range(iters):
        assign = np.argmin(np.abs(w[:, None] - centers[None, :]), axis=1)
        new = centers.copy()
        for j in range(k):
            members = w[assign == j]
            if len(members):
                new[j] = members.mean()
        new = np.sort(new)
        if np.array_equal(new, centers):
            break
        centers = new
    assign = np.argmin(np.abs(w[:, None] - centers[None, :]), axis=1)
    # empty clusters can survive degenerate seeding; drop them
    used = np.unique(assign)
    centers = centers[used]
    remap = np.full(int(assign.max()) + 1, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return make_clustering(w, centers, remap[assign])


def optimal_clustering_mse(weights, k: int) -> float:
    """Exact minimum mean squared error of any k-clustering of scalar data,
    by dynamic programming over the sorted order.  O(k n^2)."""
    w = np.sort(np.asarray(weights, dtype=np.float64).ravel())
    n = len(w)
    if k < 1 or k > n:
        raise DataError("k out of range")
    p1 = np.concatenate([[0.0], np.cumsum(w)])
    p2 = np.concatenate([[0.0], np.cumsum(w ** 2)])

    def seg_cost(i, j):  # sum of squared deviations of w[i:j]
        s = p1[j] - p1[i]
        return (p2[j] - p2[i]) - s * s / (j - i)

    cost = np.full((k + 1, n + 1), np.inf)
    cost[0, 0] = 0.0
    for c in range(1, k + 1):
        for j in range(c, n + 1):
            best = np.inf
            for i in range(c - 1, j):
                if cost[c - 1, i] == np.inf:
                    continue
                v = cost[c - 1, i] + seg_cost(i, j)
                if v < best:
                    best = v
            cost[c, j] = best
    return float(cost[k, n] / n)


def uniform_quantize(weights, bits: int) -> np.ndarray:
    """Nearest level of a symmetric uniform grid over [-max|w|, max|w|]
    with 2^bits levels."""
    if bits < 2:
        raise DataError("bits must be >= 2")
    w = np.asarray(weights, dtype=np.float64)
    peak = float(np.max(np.abs(w)))
    if peak == 0.0:
        return np.zeros_like(w)
    levels = np.linspace(-peak, peak, 2 ** bits)
    idx = np.argmin(np.abs(w.ravel()[:, None] - levels[None, :]), axis=1)
    return levels[idx].reshape(w.shape)


def dense_matmul(x, w) -> np.ndarray:
    """Textbook triple loop X @ W."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise DataError("shape mismatch")
    out = np.zeros((x.shape[0], w.shape[1]))
    for i in range(x.shape[0]):
        for j in range(w.shape[1]):
            acc = 0.0
            for t in range(x.shape[1]):
                acc += x[i, t] * w[t, j]
            out[i, j] = acc
    return out


def percentile(sorted_values, fraction: float) -> float:
    """Value at rank ceil(fraction * n) of an ascending sequence."""
    v = np.asarray(sorted_values, dtype=np.float64)
    if len(v) == 0:
        raise DataError("empty input")
    if not 0.0 < fraction <= 1.0:
        raise DataError("fraction must be in (0, 1]")
    rank = min(int(np.ceil(fraction * len(v))), len(v))
    return float(v[rank - 1])


def dbscan_quadratic(points, eps: float, min_pts: int):
    """All-pairs DBSCAN on scalar data, deterministic ascending scan order.

    Returns (list of index arrays, noise index array) in original indexing,
    the same contract as the production density scan.
    """
    p = np.asarray(points, dtype=np.float64).ravel()
    n = len(p)
    order = np.argsort(p, kind="stable")
    vals = p[order]
    neighbor_sets = [
        [j for j in range(n) if abs(vals[i] - vals[j]) <= eps]
        for i in range(n)
    ]
    is_core = [len(s) >= min_pts for s in neighbor_sets]
    labels = [-1] * n
    clusters = []
    for i in range(n):
        if labels[i] != -1 or not is_core[i]:
            continue
        cid = len(clusters)
        labels[i] = cid
        queue = [i]
        while queue:
            j = queue.pop(0)
            if not is_core[j]:
                continue
            for nb in neighbor_sets[j]:
                if labels[nb] == -1:
                    labels[nb] = cid
                    queue.append(nb)
        clusters.append(np.sort(order[[t for t in range(n)
                                       if labels[t] == cid]]))
    noise = np.sort(order[[t for t in range(n) if labels[t] == -1]])
    return clusters, noise


def clustering_mse(weights, clustering: Clustering) -> float:
    """Mean squared error between weights and their reconstruction."""
    w = np.asarray(weights, dtype=np.float64).ravel()
    return float(np.mean((w - clustering.reconstruct()) ** 2))

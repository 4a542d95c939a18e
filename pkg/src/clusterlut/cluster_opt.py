"""Outer optimization of the centroid count.

Progressive phase: distill rounds shrink the curvature-weighted clustering
metric; whenever it falls below a fraction of its value at the current
centroid count, the closest adjacent centroid pair merges.  When merging
stalls and the metric stops changing monotonically, a speculative restart
re-initializes with a widened density radius and keeps the result only if
the reconstruction loss stays within ``accept_ratio`` of the best seen.
The final answer is the snapshot with the fewest centroids that still meets
that bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Clustering, HessianDiag, HyperParams, InvariantError, \
    LayerBundle, make_clustering
from .density_init import density_init
from .distill import distill_round
from .hessian import clustering_loss, compute_hessian_diag, \
    output_reconstruction_loss


@dataclass
class TrajectoryRow:
    round: int
    centroid_count: int
    cluster_metric: float
    recon_loss: float
    phase: str


@dataclass
class OptState:
    """Mutable bookkeeping for one layer's optimization."""

    clustering: Clustering
    loss_history: list = field(default_factory=list)
    round: int = 0
    best: tuple | None = None  # (Clustering snapshot, recon loss)
    eps_schedule_pos: int = 0
    metric_at_count: float = 0.0


def should_merge(state: OptState, merge_threshold: float) -> bool:
    """True when the latest metric sits below merge_threshold times the
    metric recorded when the current centroid count was reached (an exact
    zero always qualifies)."""
    if not state.loss_history:
        raise InvariantError("no recorded loss")
    latest = state.loss_history[-1]
    return latest == 0.0 or latest < merge_threshold * state.metric_at_count


def merge_closest(clustering: Clustering,
                  transposed_weights: bool = False) -> Clustering:
    """Merge the adjacent centroid pair with the smallest gap.

    Default replacement is the count-weighted mean
    (n_a C_a + n_b C_b) / (n_a + n_b); ``transposed_weights`` swaps the
    roles of the counts.  Gap ties break toward the pair with the smaller
    combined count, then leftmost.
    """
    if clustering.k < 2:
        raise InvariantError("need at least two centroids to merge")
    c = clustering.centroids
    gaps = np.diff(c)
    pair_counts = clustering.counts[:-1] + clustering.counts[1:]
    best = min(range(len(gaps)),
               key=lambda i: (gaps[i], pair_counts[i], i))
    n_a, n_b = clustering.counts[best], clustering.counts[best + 1]
    c_a, c_b = c[best], c[best + 1]
    if transposed_weights:
        merged = (n_b * c_a + n_a * c_b) / (n_a + n_b)
    else:
        merged = (n_a * c_a + n_b * c_b) / (n_a + n_b)
    new_centroids = c.copy()
    new_centroids[best] = merged
    new_centroids[best + 1] = merged  # duplicate collapses in make_clustering
    order = np.argsort(new_centroids, kind="stable")
    remap = np.empty(clustering.k, dtype=np.int64)
    remap[order] = np.arange(clustering.k)
    return make_clustering(clustering.shadow, new_centroids[order],
                           remap[clustering.assignment])


def detect_nonmonotonic(state: OptState, window: int) -> bool:
    """True when the last ``window`` metric values are neither
    non-increasing nor non-decreasing (a constant run counts as monotone)."""
    if len(state.loss_history) < window:
        raise InvariantError("history shorter than window")
    tail = np.asarray(state.loss_history[-window:])
    d = np.diff(tail)
    return not (np.all(d <= 0) or np.all(d >= 0))


def speculative_search(bundle: LayerBundle, state: OptState,
                       hyper: HyperParams, h: HessianDiag,
                       eta: float, trajectory: list | None = None):
    """Try re-initializations with widened radii; keep the first that meets
    the accept bound, otherwise restore the best snapshot byte-for-byte.

    Returns (clustering, accepted flag).  Inner distill rounds advance
    ``state.round`` so they count against the training budget.
    """
    best_cl, best_loss = state.best
    w = bundle.weights.ravel()
    for pos, m in enumerate(hyper.eps_multipliers):
        state.eps_schedule_pos = pos
        cand = density_init(w, eps_multiplier=m)
        for _ in range(hyper.spec_rounds):
            cand = distill_round(bundle, cand, h, eta,
                                 normalize_offsets=not hyper.raw_centroid_offset)
            state.round += 1
            recon = output_reconstruction_loss(bundle, cand)
            if trajectory is not None:
                trajectory.append(TrajectoryRow(
                    state.round, cand.k,
                    clustering_loss(bundle, cand, h), recon, "speculative"))
            if recon <= hyper.accept_ratio * best_loss:
                return cand, True
    return best_cl.copy(), False


def optimize_layer(bundle: LayerBundle, hyper: HyperParams,
                   fixed_k: int | None = None,
                   h: HessianDiag | None = None):
    """Run the full loop and return (clustering, trajectory rows).

    ``fixed_k`` disables threshold-driven merging and speculation: the
    initialization is merged down to at most ``fixed_k`` centroids and only
    distill rounds run, for studies at a pinned centroid count.  Those
    rounds reclassify on the round's full preconditioned step rather than
    the integrated shadow drift (see distill_round), giving the refinement
    a stable fixed point.
    """
    w = bundle.weights.ravel()
    if h is None:
        h = compute_hessian_diag(bundle.calib)
    eta = hyper.eta
    clustering = density_init(w)
    if fixed_k is not None:
        # a smooth unimodal sample can initialize below the pinned count;
        # shrink the radius until enough clusters exist, then merge down
        multiplier = 1.0
        while clustering.k < fixed_k and multiplier > 1e-6:
            multiplier /= 2.0
            clustering = density_init(w, eps_multiplier=multiplier)
        if clustering.k < fixed_k:
            raise InvariantError(
                f"cannot reach {fixed_k} centroids from initialization")
        while clustering.k > fixed_k:
            clustering = merge_closest(
                clustering, transposed_weights=hyper.transposed_merge_weights)
    # cap at 256 so 8-bit indices always suffice
    while clustering.k > 256:
        clustering = merge_closest(clustering)

    trajectory: list[TrajectoryRow] = []
    state = OptState(clustering)
    state.metric_at_count = clustering_loss(bundle, clustering, h)
    recon0 = output_reconstruction_loss(bundle, clustering)
    state.best = (clustering.copy(), recon0)
    best_recon = recon0
    best_per_k: dict[int, tuple[float, Clustering]] = {
        clustering.k: (recon0, clustering.copy())}
    trajectory.append(TrajectoryRow(0, clustering.k, state.metric_at_count,
                                    recon0, "init"))

    rounds_since_merge = 0
    accepted_restart_ks: set[int] = set()
    while state.round < hyper.max_rounds:
        state.clustering = distill_round(
            bundle, state.clustering, h, eta,
            normalize_offsets=not hyper.raw_centroid_offset,
            integrate_drift=fixed_k is None)
        state.round += 1
        metric = clustering_loss(bundle, state.clustering, h)
        recon = output_reconstruction_loss(bundle, state.clustering)
        state.loss_history.append(metric)
        phase = "progressive" if fixed_k is None else "fixed"
        trajectory.append(TrajectoryRow(state.round, state.clustering.k,
                                        metric, recon, phase))
        k = state.clustering.k
        if recon < best_recon:
            best_recon = recon
        if recon < state.best[1]:
            state.best = (state.clustering.copy(), recon)
        if k not in best_per_k or recon < best_per_k[k][0]:
            best_per_k[k] = (recon, state.clustering.copy())

        if fixed_k is not None:
            rounds_since_merge += 1
            continue

        if state.clustering.k >= 2 and should_merge(state,
                                                    hyper.merge_threshold):
            state.clustering = merge_closest(
                state.clustering,
                transposed_weights=hyper.transposed_merge_weights)
            state.metric_at_count = clustering_loss(bundle, state.clustering, h)
            rounds_since_merge = 0
            trajectory.append(TrajectoryRow(
                state.round, state.clustering.k, state.metric_at_count,
                output_reconstruction_loss(bundle, state.clustering), "merge"))
            continue
        rounds_since_merge += 1

        if (rounds_since_merge >= hyper.stabilize_window
                and len(state.loss_history) >= hyper.plateau_window
                and detect_nonmonotonic(state, hyper.plateau_window)):
            cand, accepted = speculative_search(bundle, state, hyper, h, eta,
                                                trajectory)
            rounds_since_merge = 0
            if not accepted or cand.k in accepted_restart_ks:
                # deterministic re-runs cannot produce anything new
                state.clustering = cand
                trajectory.append(TrajectoryRow(
                    state.round, cand.k,
                    clustering_loss(bundle, cand, h),
                    output_reconstruction_loss(bundle, cand), "revert"))
                break
            accepted_restart_ks.add(cand.k)
            state.clustering = cand
            state.loss_history.clear()
            state.metric_at_count = clustering_loss(bundle, cand, h)
            recon = output_reconstruction_loss(bundle, cand)
            if recon < best_recon:
                best_recon = recon
            if cand.k not in best_per_k or recon < best_per_k[cand.k][0]:
                best_per_k[cand.k] = (recon, cand.copy())
            trajectory.append(TrajectoryRow(state.round, cand.k,
                                            state.metric_at_count, recon,
                                            "restart"))

    if fixed_k is not None and fixed_k in best_per_k:
        final = best_per_k[fixed_k][1]
        final.validate()
        return final, trajectory
    bound = hyper.accept_ratio * best_recon
    eligible = [(k, rc) for k, (rc, _) in best_per_k.items() if rc <= bound]
    if eligible:
        k_final = min(k for k, _ in eligible)
        final = best_per_k[k_final][1]
    else:
        final = best_per_k[max(best_per_k)][1]
    final.validate()
    return final, trajectory

"""Cosine k-means over metric vectors.

Seeding is deterministic farthest-first from the corpus-order first
vector; iteration stops when consecutive partitions are identical
(empty symmetric difference).  Quality of a partition is scored by the
within-cluster similarity density: the sum over clusters of the square
root of the pairwise-similarity sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, InconsistentClustering, TooFewVectors

# Similarities this close are treated as tied so that tie-breaks by corpus
# order are stable against last-ulp normalization noise.
_TIE_DECIMALS = 12


@dataclass
class VectorSet:
    """Ordered (change_id, vector) rows of one corpus."""

    ids: tuple[str, ...]
    matrix: np.ndarray
    metric_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2:
            raise ValueError("vector matrix must be 2-dimensional")
        if len(self.ids) != self.matrix.shape[0]:
            raise ValueError("one id per row required")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("change ids must be unique")
        self.ids = tuple(self.ids)

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def zero_rows(self) -> np.ndarray:
        return ~self.matrix.any(axis=1)

    def without_zero_rows(self) -> tuple["VectorSet", tuple[str, ...]]:
        """(nonzero subset, ids of all-zero rows)."""
        zero = self.zero_rows()
        keep = ~zero
        sub = VectorSet(
            ids=tuple(np.array(self.ids, dtype=object)[keep]),
            matrix=self.matrix[keep],
            metric_names=self.metric_names,
        )
        noop_ids = tuple(np.array(self.ids, dtype=object)[zero])
        return sub, noop_ids


@dataclass
class ClusterParams:
    k: int
    max_iterations: int = 300
    rng_seed: int = 0  # reserved for randomized restarts; default run is deterministic
    zero_vector_policy: str = "exclude"  # or "own_cluster"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.zero_vector_policy not in ("exclude", "own_cluster"):
            raise ValueError(f"unknown zero_vector_policy {self.zero_vector_policy!r}")


@dataclass
class Clustering:
    k: int
    ids: tuple[str, ...]
    assignment: dict
    centroids: np.ndarray
    iterations: int
    density: float
    converged: bool = True
    noop_ids: tuple[str, ...] = ()

    def members(self, cluster: int) -> list[str]:
        return [cid for cid in self.ids if self.assignment[cid] == cluster]

    def sizes(self) -> list[int]:
        counts = [0] * self.k
        for cluster in self.assignment.values():
            counts[cluster] += 1
        return counts


def cosine_similarity(v1, v2) -> float:
    """Cosine of the angle between two vectors; 0 when either norm is 0."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.shape != v2.shape:
        raise DimensionMismatch(f"{v1.shape} vs {v2.shape}")
    n1 = np.linalg.norm(v1)
    n2 = np.linalg.norm(v2)
    if n1 == 0.0 or n2 == 0.0:
        return 0.0
    return float(np.dot(v1, v2) / (n1 * n2))


def unit_rows(matrix: np.ndarray) -> np.ndarray:
    """Rows scaled to unit norm; all-zero rows stay zero."""
    norms = np.linalg.norm(matrix, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    return matrix / safe[:, None]


def seed_initial_partition(vs: VectorSet, k: int) -> np.ndarray:
    """k seed vectors: corpus-first, then repeatedly the vector whose
    maximum similarity to the chosen seeds is smallest (ties: lowest
    corpus index)."""
    n = len(vs)
    if n < k:
        raise TooFewVectors(f"{n} vectors for k={k}")
    units = unit_rows(vs.matrix)
    chosen = [0]
    # max similarity of every vector to the chosen seed set so far
    max_sim = units @ units[0]
    for _ in range(1, k):
        ranked = np.round(max_sim, _TIE_DECIMALS)
        ranked[chosen] = np.inf
        next_idx = int(np.argmin(ranked))
        chosen.append(next_idx)
        max_sim = np.maximum(max_sim, units @ units[next_idx])
    return vs.matrix[chosen].copy()


def _assign(units: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    sims = units @ unit_rows(centroids).T
    return sims.argmax(axis=1)


def _reseed_vector(units, assign, centroids, taken: set) -> int:
    """Index of the donor member used to reseed an empty cluster.

    Picks, from the largest cluster, the member least similar to its own
    centroid (skipping indices already taken by another empty cluster).
    """
    sizes = np.bincount(assign, minlength=centroids.shape[0])
    donor = int(sizes.argmax())
    member_idx = np.flatnonzero(assign == donor)
    centroid_unit = unit_rows(centroids[donor][None, :])[0]
    sims = np.round(units[member_idx] @ centroid_unit, _TIE_DECIMALS)
    for idx in member_idx[np.argsort(sims, kind="stable")]:
        if int(idx) not in taken:
            return int(idx)
    return int(member_idx[0])


def kmeans_cluster(vs: VectorSet, params: ClusterParams) -> Clustering:
    """Cosine k-means with deterministic seeding and tie-breaks.

    Clustering happens in direction space: rows are normalized up front,
    and centroids are plain means of member directions (not renormalized).
    That makes the assignment map invariant under positive rescaling of
    any input vector.  Zero vectors are excluded (and reported as
    noop_ids) or given one extra cluster, per ``params.zero_vector_policy``.
    """
    nonzero, noop_ids = vs.without_zero_rows()
    if len(nonzero) < params.k:
        raise TooFewVectors(
            f"{len(nonzero)} nonzero vectors for k={params.k}"
        )
    active = VectorSet(
        ids=nonzero.ids,
        matrix=unit_rows(nonzero.matrix),
        metric_names=nonzero.metric_names,
    )

    units = active.matrix
    centroids = seed_initial_partition(active, params.k)
    prev = None
    iterations = 0
    converged = False
    for _ in range(params.max_iterations):
        assign = _assign(units, centroids)
        if prev is not None and np.array_equal(assign, prev):
            converged = True
            break
        prev = assign
        iterations += 1
        centroids = _update_centroids(active, units, assign, centroids)

    # Means of the final partition; a cluster left empty keeps its
    # deterministic reseed vector as centroid.
    final_centroids = _update_centroids(active, units, assign, centroids)

    assignment = {cid: int(c) for cid, c in zip(active.ids, assign)}
    k = params.k
    if params.zero_vector_policy == "own_cluster" and noop_ids:
        for cid in noop_ids:
            assignment[cid] = k
        final_centroids = np.vstack([final_centroids, np.zeros(vs.dim)])
        k += 1
        noop_ids = ()

    clustering = Clustering(
        k=k,
        ids=tuple(assignment),
        assignment=assignment,
        centroids=final_centroids,
        iterations=iterations,
        density=0.0,
        converged=converged,
        noop_ids=noop_ids,
    )
    clustering.density = clustering_density(clustering, vs)
    return clustering


def _update_centroids(active, units, assign, old_centroids):
    """Mean of each cluster's members; empty clusters get a reseed vector."""
    k, dim = old_centroids.shape
    centroids = np.zeros((k, dim))
    taken: set = set()
    for j in range(k):
        mask = assign == j
        if mask.any():
            centroids[j] = active.matrix[mask].mean(axis=0)
    for j in range(k):
        if not (assign == j).any():
            idx = _reseed_vector(units, assign, centroids, taken)
            taken.add(idx)
            centroids[j] = active.matrix[idx]
    return centroids


def clustering_density(clustering: Clustering, vs: VectorSet) -> float:
    """Sum over clusters of sqrt(pairwise similarity sum), clamped at 0.

    Unordered distinct pairs only; singleton and empty clusters score 0.
    """
    id_to_row = {cid: i for i, cid in enumerate(vs.ids)}
    missing = [cid for cid in clustering.assignment if cid not in id_to_row]
    if missing:
        raise InconsistentClustering(f"changes not in vector set: {missing[:3]}")
    units = unit_rows(vs.matrix)
    total = 0.0
    for j in range(clustering.k):
        rows = [id_to_row[cid] for cid, c in clustering.assignment.items() if c == j]
        if len(rows) < 2:
            continue
        cluster_units = units[rows]
        summed = cluster_units.sum(axis=0)
        norms_sq = float((cluster_units * cluster_units).sum())
        pair_sum = (float(summed @ summed) - norms_sq) / 2.0
        total += float(np.sqrt(max(pair_sum, 0.0)))
    return total


@dataclass
class KAttempt:
    k: int
    iterations: int
    converged: bool
    density: float
    sizes: list[int]
    dispersion: list[tuple[float, float]]  # per cluster: (mean, min) member-centroid sim


@dataclass
class KSelection:
    clustering: Clustering
    trace: list[KAttempt] = field(default_factory=list)
    reached: bool = True


def _attempt_stats(clustering: Clustering, vs: VectorSet) -> list[tuple[float, float]]:
    id_to_row = {cid: i for i, cid in enumerate(vs.ids)}
    units = unit_rows(vs.matrix)
    stats = []
    for j in range(clustering.k):
        rows = [id_to_row[cid] for cid in clustering.members(j)]
        if not rows:
            stats.append((0.0, 0.0))
            continue
        centroid_unit = unit_rows(clustering.centroids[j][None, :])[0]
        sims = units[rows] @ centroid_unit
        stats.append((float(sims.mean()), float(sims.min())))
    return stats


def select_k(
    vs: VectorSet,
    n_classes: int,
    min_density: float,
    k_max: int,
    params: ClusterParams | None = None,
) -> KSelection:
    """Escalate k from n_classes until the density clears min_density.

    Returns the first clustering whose density exceeds the threshold, or
    the k_max clustering flagged not-reached, with the full attempt trace
    either way.
    """
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    if k_max < n_classes:
        raise ValueError("k_max must be >= n_classes")
    base = params if params is not None else ClusterParams(k=n_classes)
    trace = []
    clustering = None
    for k in range(n_classes, k_max + 1):
        clustering = kmeans_cluster(vs, replace(base, k=k))
        trace.append(
            KAttempt(
                k=k,
                iterations=clustering.iterations,
                converged=clustering.converged,
                density=clustering.density,
                sizes=clustering.sizes(),
                dispersion=_attempt_stats(clustering, vs),
            )
        )
        if clustering.density > min_density:
            return KSelection(clustering, trace, reached=True)
    return KSelection(clustering, trace, reached=False)

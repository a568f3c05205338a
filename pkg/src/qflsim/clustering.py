"""Grouping of devices by model-parameter similarity.

All methods take an (n_devices, n_params) matrix of parameter vectors and
return a partition: every device lands in exactly one group. DBSCAN noise
points are promoted to singleton clusters so no device ever stalls outside
the update flow. Labels are compacted to 0..K-1 in order of first appearance
by device index.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .constants import KMEANS_MAX_ITER, KMEANS_TOL

logger = logging.getLogger(__name__)

CLUSTER_METHODS = ("kmeans", "agglomerative", "dbscan", "mean_shift")
KMEANS_INITS = ("kmeanspp", "farthest_point")

# documented extension points, not implemented
UNSUPPORTED_METHODS = ("gmm", "spectral")


@dataclass(frozen=True)
class ClusterConfig:
    method: str = "kmeans"
    k: int = 1  # ignored by dbscan / mean_shift
    dbscan_eps: float = 0.5
    dbscan_min_samples: int = 5
    seed: int = 0
    kmeans_init: str = "kmeanspp"

    def __post_init__(self):
        if self.method in UNSUPPORTED_METHODS:
            raise NotImplementedError(
                f"clustering method {self.method!r} is a declared extension point"
            )
        if self.method not in CLUSTER_METHODS:
            raise ValueError(f"unknown clustering method {self.method!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.dbscan_eps <= 0:
            raise ValueError("dbscan_eps must be > 0")
        if self.kmeans_init not in KMEANS_INITS:
            raise ValueError(f"unknown kmeans init {self.kmeans_init!r}")


@dataclass
class ClusterAssignment:
    """Per-device labels (0..K-1) and the groups they induce."""

    labels: np.ndarray
    groups: list[list[int]]


def cluster_count(n_devices: int) -> int:
    """Adaptive cluster count: ceil(sqrt(n/2)), at least 1 (exact integer arithmetic)."""
    if n_devices < 1:
        raise ValueError("n_devices must be >= 1")
    k = math.isqrt((n_devices + 1) // 2)
    if 2 * k * k < n_devices:
        k += 1
    return max(1, k)


def pairwise_dissimilarity(params_i: np.ndarray, params_j: np.ndarray) -> float:
    """Squared Euclidean distance between two parameter vectors."""
    a = np.asarray(params_i, dtype=float)
    b = np.asarray(params_j, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"parameter shapes differ: {a.shape} vs {b.shape}")
    diff = a - b
    return float(diff @ diff)


def redundancy_test(params_i: np.ndarray, params_j: np.ndarray, epsilon: float) -> bool:
    """True iff ||theta_i - theta_j|| <= epsilon (boundary inclusive)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    return math.sqrt(pairwise_dissimilarity(params_i, params_j)) <= epsilon


def _squared_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _init_kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[int(rng.integers(n))]]
    while len(centers) < k:
        d2 = _squared_distances(X, np.array(centers)).min(axis=1)
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a center; any choice is equal
            centers.append(X[int(rng.integers(n))])
            continue
        centers.append(X[int(rng.choice(n, p=d2 / total))])
    return np.array(centers)


def _init_farthest_point(X: np.ndarray, k: int) -> np.ndarray:
    """Deterministic seeding: start farthest from the centroid, then max-min distance."""
    centroid = X.mean(axis=0)
    first = int(np.argmax(((X - centroid) ** 2).sum(axis=1)))
    chosen = [first]
    while len(chosen) < k:
        d2 = _squared_distances(X, X[chosen]).min(axis=1)
        chosen.append(int(np.argmax(d2)))
    return X[chosen].copy()


def _kmeans(X: np.ndarray, k: int, rng: np.random.Generator, init: str) -> tuple[np.ndarray, list[float]]:
    """Lloyd iterations; returns labels and the per-iteration within-cluster SSE."""
    centers = _init_kmeanspp(X, k, rng) if init == "kmeanspp" else _init_farthest_point(X, k)
    wcss_history: list[float] = []
    labels = np.zeros(X.shape[0], dtype=int)
    for _ in range(KMEANS_MAX_ITER):
        d2 = _squared_distances(X, centers)
        labels = np.argmin(d2, axis=1)  # ties -> lower center index
        wcss_history.append(float(d2[np.arange(X.shape[0]), labels].sum()))
        new_centers = centers.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new_centers[c] = X[members].mean(axis=0)
            else:
                # deterministic empty-cluster fix: grab the point farthest from its center
                far = int(np.argmax(d2[np.arange(X.shape[0]), labels]))
                new_centers[c] = X[far]
        move = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
        centers = new_centers
        if move < KMEANS_TOL:
            break
    d2 = _squared_distances(X, centers)
    labels = np.argmin(d2, axis=1)
    return labels, wcss_history


def _agglomerative_ward(X: np.ndarray, k: int) -> np.ndarray:
    """Bottom-up Ward merges until k clusters remain."""
    members: list[list[int]] = [[i] for i in range(X.shape[0])]
    means = [X[i].astype(float).copy() for i in range(X.shape[0])]
    while len(members) > k:
        best = (np.inf, -1, -1)
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                na, nb = len(members[a]), len(members[b])
                gap = means[a] - means[b]
                cost = (na * nb) / (na + nb) * float(gap @ gap)
                if cost < best[0]:
                    best = (cost, a, b)
        _, a, b = best
        na, nb = len(members[a]), len(members[b])
        means[a] = (na * means[a] + nb * means[b]) / (na + nb)
        members[a].extend(members[b])
        del members[b], means[b]
    labels = np.zeros(X.shape[0], dtype=int)
    for label, group in enumerate(members):
        labels[group] = label
    return labels


def _dbscan(X: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Density clustering; returns -1 for noise (promoted later)."""
    n = X.shape[0]
    dist = np.sqrt(_squared_distances(X, X))
    neighbors = [np.nonzero(dist[i] <= eps)[0] for i in range(n)]  # includes self
    core = np.array([len(nbrs) >= min_samples for nbrs in neighbors])
    labels = np.full(n, -1, dtype=int)
    cluster_id = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        queue = [i]
        labels[i] = cluster_id
        while queue:
            j = queue.pop(0)
            if not core[j]:
                continue
            for nb in neighbors[j]:
                if labels[nb] == -1:
                    labels[nb] = cluster_id
                    queue.append(int(nb))
        cluster_id += 1
    return labels


def _mean_shift(X: np.ndarray) -> np.ndarray:
    """Flat-kernel shift; bandwidth = median pairwise distance, modes merged within bandwidth/2."""
    n = X.shape[0]
    if n == 1:
        return np.zeros(1, dtype=int)
    dist = np.sqrt(_squared_distances(X, X))
    bandwidth = float(np.median(dist[np.triu_indices(n, k=1)]))
    if bandwidth <= 0:
        return np.zeros(n, dtype=int)
    modes = X.astype(float).copy()
    for i in range(n):
        point = modes[i]
        for _ in range(200):
            within = ((X - point) ** 2).sum(axis=1) <= bandwidth**2
            shifted = X[within].mean(axis=0)
            if np.linalg.norm(shifted - point) < 1e-7 * bandwidth:
                point = shifted
                break
            point = shifted
        modes[i] = point
    labels = np.full(n, -1, dtype=int)
    next_label = 0
    for i in range(n):
        if labels[i] != -1:
            continue
        labels[i] = next_label
        for j in range(i + 1, n):
            if labels[j] == -1 and np.linalg.norm(modes[i] - modes[j]) <= bandwidth / 2:
                labels[j] = next_label
        next_label += 1
    return labels


def _compact(labels: np.ndarray) -> ClusterAssignment:
    """Relabel to 0..K-1 by first appearance; noise (-1) becomes singletons."""
    out = np.empty(len(labels), dtype=int)
    remap: dict[int, int] = {}
    next_label = 0
    for i, raw in enumerate(labels):
        raw = int(raw)
        if raw == -1:  # each noise point is its own cluster
            out[i] = next_label
            next_label += 1
        else:
            if raw not in remap:
                remap[raw] = next_label
                next_label += 1
            out[i] = remap[raw]
    groups: list[list[int]] = [[] for _ in range(next_label)]
    for i, label in enumerate(out):
        groups[label].append(i)
    return ClusterAssignment(labels=out, groups=groups)


def cluster_devices(weight_rows: np.ndarray, cfg: ClusterConfig) -> ClusterAssignment:
    """Partition devices by their parameter vectors under the configured method."""
    X = np.asarray(weight_rows, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("weight_rows must be a non-empty 2-d matrix")
    n = X.shape[0]

    if cfg.method in ("kmeans", "agglomerative"):
        k = cfg.k
        if k > n:
            logger.warning("k=%d exceeds %d devices; clamping", k, n)
            k = n
        if cfg.method == "kmeans":
            rng = np.random.default_rng(cfg.seed)
            labels, _ = _kmeans(X, k, rng, cfg.kmeans_init)
        else:
            labels = _agglomerative_ward(X, k)
    elif cfg.method == "dbscan":
        labels = _dbscan(X, cfg.dbscan_eps, cfg.dbscan_min_samples)
    else:
        labels = _mean_shift(X)

    return _compact(labels)

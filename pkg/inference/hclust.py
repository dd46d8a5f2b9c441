"""Agglomerative hierarchical clustering (the selection procedure) and partition equality.

Distances are raw Euclidean. Cluster-to-cluster distances are updated with the
Lance-Williams recurrence for single, complete and average linkage. A cluster
is stored in the slot of its smallest original index; ties are broken towards
the lexicographically smallest (min index, max index) pair, which is exactly
the first minimum of the symmetric distance matrix in row-major order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform

from inference.errors import ConfigError, DimensionError
from tools.datasets import as_values

log = logging.getLogger(__name__)

LINKAGES = ("average", "complete", "single")
LINKAGE_ALIASES = {"avg": "average", "average": "average", "complete": "complete", "single": "single"}


@dataclass
class ClusterPartition:
    """A labeling of the n points into K clusters (labels 1..K, first-appearance order)."""
    labels: np.ndarray
    K: int
    merge_history: Optional[list[tuple[int, int, float]]] = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        present = np.unique(self.labels)
        if not np.array_equal(present, np.arange(1, self.K + 1)):
            raise ConfigError(f"Labels must use every value in 1..{self.K}, got {present.tolist()}")
        if self.merge_history is not None and len(self.merge_history) != self.n - self.K:
            raise ConfigError(
                f"Merge history has {len(self.merge_history)} entries, expected {self.n - self.K}"
            )

    @classmethod
    def from_labels(cls, labels) -> "ClusterPartition":
        """Partition from arbitrary integer labels (relabelled by first appearance)."""
        canon = canonical_labels(labels)
        return cls(canon, int(canon.max()))

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def members(self, k: int) -> np.ndarray:
        """0-based row indices of cluster k (1-based)."""
        if not 1 <= k <= self.K:
            raise ConfigError(f"Cluster {k} does not exist (K={self.K})")
        return np.flatnonzero(self.labels == k)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K + 1)[1:]


def canonical_labels(labels) -> np.ndarray:
    """Relabel to 1..K in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.shape[0], dtype=int)
    rank[np.argsort(first, kind="stable")] = np.arange(first.shape[0])
    return rank[inverse.reshape(-1)] + 1


def normalize_linkage(linkage: str) -> str:
    try:
        return LINKAGE_ALIASES[linkage]
    except KeyError:
        raise ConfigError(f"Unknown linkage {linkage!r}; expected one of {LINKAGES}") from None


def _lance_williams(linkage: str, d_a: np.ndarray, d_b: np.ndarray, n_a: float, n_b: float) -> np.ndarray:
    if linkage == "single":
        return np.minimum(d_a, d_b)
    if linkage == "complete":
        return np.maximum(d_a, d_b)
    return (n_a * d_a + n_b * d_b) / (n_a + n_b)


def hclust(X, linkage: str = "average", K: int = 2) -> ClusterPartition:
    """Cut the agglomerative hierarchy of the rows of X at K clusters."""
    values = as_values(X)
    linkage = normalize_linkage(linkage)
    n = values.shape[0]
    if not 1 <= K <= n:
        raise DimensionError(f"K={K} out of range for n={n}")

    dist = squareform(pdist(values)) if n > 1 else np.zeros((1, 1))
    np.fill_diagonal(dist, np.inf)
    sizes = np.ones(n)
    slot = np.arange(n)
    history: list[tuple[int, int, float]] = []

    for _ in range(n - K):
        a, b = divmod(int(np.argmin(dist)), n)   # a < b
        history.append((a, b, float(dist[a, b])))

        merged = _lance_williams(linkage, dist[a], dist[b], sizes[a], sizes[b])
        dist[a, :] = merged
        dist[:, a] = merged
        dist[a, a] = np.inf
        dist[b, :] = np.inf
        dist[:, b] = np.inf

        sizes[a] += sizes[b]
        slot[slot == b] = a

    return ClusterPartition(canonical_labels(slot), K, history)


def partitions_equal(A: ClusterPartition, B: ClusterPartition) -> bool:
    """True iff A and B induce the same set partition (label-permutation invariant)."""
    if A.n != B.n:
        raise DimensionError(f"Partitions of different sizes: {A.n} vs {B.n}")
    return A.K == B.K and bool(np.array_equal(canonical_labels(A.labels), canonical_labels(B.labels)))

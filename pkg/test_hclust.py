"""Tests for agglomerative clustering against a brute-force reference."""
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from inference.errors import ConfigError, DimensionError
from inference.hclust import ClusterPartition, canonical_labels, hclust, partitions_equal
from tools.datasets import make_rng


def _brute_force(values: np.ndarray, linkage: str, K: int) -> np.ndarray:
    """O(n^3) reference: recompute every cluster-to-cluster distance from points."""
    clusters = [[i] for i in range(values.shape[0])]
    point_d = np.sqrt(((values[:, None, :] - values[None, :, :]) ** 2).sum(axis=2))
    reduce = {"average": np.mean, "complete": np.max, "single": np.min}[linkage]
    while len(clusters) > K:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                d = reduce(point_d[np.ix_(clusters[a], clusters[b])])
                key = (d, min(clusters[a]), min(clusters[b]))
                if best is None or key < best[0]:
                    best = (key, a, b)
        _, a, b = best
        clusters[a] = sorted(clusters[a] + clusters[b])
        del clusters[b]
    labels = np.empty(values.shape[0], dtype=int)
    for idx, members in enumerate(clusters):
        labels[members] = idx + 1
    return canonical_labels(labels)


def test_matches_brute_force():
    """Lance-Williams updates agree with direct recomputation for all linkages."""
    for seed in range(12):
        rng = make_rng(seed)
        n = 5 + seed % 8
        values = rng.normal(size=(n, 2)) + np.repeat([[0.0, 0.0], [4.0, 0.0]], [n // 2, n - n // 2], axis=0)
        for linkage in ("average", "complete", "single"):
            for K in (1, 2, 3):
                got = hclust(values, linkage, K).labels
                want = _brute_force(values, linkage, K)
                assert np.array_equal(got, want), \
                    f"seed={seed} {linkage} K={K}: {got.tolist()} vs {want.tolist()}"
    print("  PASSED: hclust matches brute force")


def test_small_example():
    """1-D points 0, 1, 5, 6, 20 cut at K=2 under average linkage."""
    part = hclust([[0.0], [1.0], [5.0], [6.0], [20.0]], "avg", 2)
    assert part.labels.tolist() == [1, 1, 1, 1, 2], f"Labels: {part.labels.tolist()}"
    assert len(part.merge_history) == 3, f"History: {part.merge_history}"
    assert part.merge_history[0][:2] == (0, 1), f"First merge {part.merge_history[0]}"
    print("  PASSED: small average-linkage example")


def test_labels_canonical():
    part = hclust([[10.0, 0.0], [0.0, 0.0], [10.2, 0.0], [0.1, 0.0]], "single", 2)
    assert part.labels.tolist() == [1, 2, 1, 2], f"Labels: {part.labels.tolist()}"
    assert part.sizes().tolist() == [2, 2]
    print("  PASSED: labels numbered by first appearance")


def test_partitions_equal():
    A = ClusterPartition.from_labels([1, 1, 2, 2, 3])
    B = ClusterPartition.from_labels([7, 7, 4, 4, 9])
    C = ClusterPartition.from_labels([1, 2, 2, 2, 3])
    assert partitions_equal(A, B), "Label permutation must not matter"
    assert not partitions_equal(A, C), "Different partitions compared equal"
    try:
        partitions_equal(A, ClusterPartition.from_labels([1, 2]))
    except DimensionError:
        print("  PASSED: partitions_equal")
        return
    raise AssertionError("Expected DimensionError for different n")


def test_invalid_arguments():
    for call in (
        lambda: hclust([[0.0], [1.0], [2.0]], "ward", 2),
        lambda: ClusterPartition(np.array([1, 1, 3]), 3),
        lambda: ClusterPartition.from_labels([1, 1, 2]).members(3),
    ):
        try:
            call()
        except ConfigError:
            continue
        raise AssertionError("Expected ConfigError")
    try:
        hclust([[0.0], [1.0]], "average", 3)
    except DimensionError:
        print("  PASSED: invalid linkage, labels and K rejected")
        return
    raise AssertionError("Expected DimensionError for K > n")


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    scale=st.sampled_from([0.25, 0.5, 2.0, 8.0]),
    shift=st.integers(-50, 50),
    linkage=st.sampled_from(["average", "complete", "single"]),
)
def test_location_scale_invariance(seed, scale, shift, linkage):
    """Cluster(a X + 1 b^T) = Cluster(X)."""
    values = make_rng(seed).normal(size=(12, 2))
    base = hclust(values, linkage, 3)
    moved = hclust(scale * values + shift, linkage, 3)
    assert partitions_equal(base, moved), f"seed={seed} scale={scale} shift={shift} {linkage}"


def test_edge_cuts():
    part = hclust([[0.0], [1.0], [10.0]], "average", 2)
    assert part.labels.tolist() == [1, 1, 2], f"Labels: {part.labels.tolist()}"
    values = make_rng(4).normal(size=(7, 2))
    for linkage in ("average", "complete", "single"):
        singletons = hclust(values, linkage, 7)
        assert singletons.labels.tolist() == list(range(1, 8)), f"{linkage}: {singletons.labels.tolist()}"
        assert not singletons.merge_history
    print("  PASSED: {0,1,10} at K=2 and K=n singletons")


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    linkage=st.sampled_from(["average", "complete", "single"]),
    K=st.integers(1, 5),
)
def test_row_permutation_invariance(seed, linkage, K):
    """Reordering the rows reorders the partition and changes nothing else."""
    rng = make_rng(seed)
    values = rng.normal(size=(11, 2))
    order = rng.permutation(11)
    base = hclust(values, linkage, K)
    shuffled = hclust(values[order], linkage, K)
    restored = np.empty_like(shuffled.labels)
    restored[order] = shuffled.labels
    assert partitions_equal(base, ClusterPartition.from_labels(restored)), \
        f"seed={seed} {linkage} K={K}: {base.labels.tolist()} vs {restored.tolist()}"


if __name__ == "__main__":
    tests = [
        test_matches_brute_force,
        test_small_example,
        test_labels_canonical,
        test_partitions_equal,
        test_invalid_arguments,
        test_location_scale_invariance,
        test_edge_cuts,
        test_row_permutation_invariance,
    ]

    passed = 0
    failed = 0
    for test in tests:
        try:
            test()
            passed += 1
        except Exception as e:
            print(f"  FAILED: {test.__name__}: {e}")
            failed += 1

    print(f"\n{'='*50}")
    print(f"Results: {passed} passed, {failed} failed, {len(tests)} total")
    if failed == 0:
        print("ALL TESTS PASSED")
    else:
        print(f"{failed} TEST(S) FAILED")

"""Tests for the P0/P1/P2 decomposition, the statistic R and the sigma estimators."""
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from inference.decomposition import (
    build_decomposition,
    reconstruct_x_phi,
    reconstruct_x_prime,
    resolve_sigma,
    sigma_hat_all,
    sigma_hat_clustered,
    statistic_R,
)
from inference.errors import (
    ConfigError,
    DegenerateDataError,
    InsufficientDegreesOfFreedomError,
)
from inference.hclust import ClusterPartition
from inference.truncation import map_prop1
from tools.datasets import make_rng

FOUR = np.array([[0.0, 0.0], [2.0, 0.0], [10.0, 0.0], [12.0, 0.0]])
FOUR_PART = ClusterPartition.from_labels([1, 1, 2, 2])


def test_four_point_example():
    D = build_decomposition(FOUR, FOUR_PART, 1, 2)
    assert abs(D.norm0 - 10.0) < 1e-12, f"norm0={D.norm0}"
    assert abs(D.norm1 - 2.0) < 1e-12, f"norm1={D.norm1}"
    assert abs(D.norm2 ** 2 - 144.0) < 1e-9, f"||P2 X||^2={D.norm2 ** 2}"
    assert abs(statistic_R(D) - 50.0) < 1e-10, f"R={statistic_R(D)}"
    assert abs(D.contrast_norm - 10.0) < 1e-12, f"||X^T v||={D.contrast_norm}"
    assert D.m == 4 and abs(D.v_norm - 1.0) < 1e-15
    assert abs(map_prop1(2.0, D) - 2.0) < 1e-12, f"map_prop1(2)={map_prop1(2.0, D)}"
    print("  PASSED: four-point example")


def test_four_point_sigma_estimates():
    assert abs(sigma_hat_all(FOUR).value ** 2 - 104.0 / 6.0) < 1e-10
    assert abs(sigma_hat_clustered(FOUR, FOUR_PART).value ** 2 - 1.0) < 1e-12
    one = ClusterPartition.from_labels([1, 1, 1, 1])
    assert abs(sigma_hat_clustered(FOUR, one).value - sigma_hat_all(FOUR).value) < 1e-12, \
        "K=1 pooled estimate must equal sigma_hat_all"
    assert abs(sigma_hat_all(-3.0 * FOUR).value - 3.0 * sigma_hat_all(FOUR).value) < 1e-10
    print("  PASSED: sigma estimates on the four-point example")


def test_sigma_degenerate():
    point_masses = np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [5.0, 5.0]])
    for call in (
        lambda: sigma_hat_all(np.ones((4, 2))),
        lambda: sigma_hat_clustered(point_masses, FOUR_PART),
    ):
        try:
            call()
        except DegenerateDataError:
            continue
        raise AssertionError("Expected DegenerateDataError")
    try:
        resolve_sigma("true_sigma", FOUR, FOUR_PART)
    except ConfigError:
        print("  PASSED: degenerate sigma estimates rejected")
        return
    raise AssertionError("true_sigma without a value must be a ConfigError")


def test_equal_means_give_zero_R():
    X = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 0.0], [2.0, 0.0]])
    D = build_decomposition(X, FOUR_PART, 1, 2, strict=False)
    assert D.norm0 == 0.0 and statistic_R(D) == 0.0, f"norm0={D.norm0}"
    try:
        build_decomposition(X, FOUR_PART, 1, 2)
    except DegenerateDataError:
        print("  PASSED: equal cluster means -> R = 0, strict mode refuses")
        return
    raise AssertionError("Expected DegenerateDataError in strict mode")


def test_degenerate_and_invalid_pairs():
    try:
        build_decomposition(np.ones((4, 2)), FOUR_PART, 1, 2)
        raise AssertionError("Expected DegenerateDataError for identical rows")
    except DegenerateDataError:
        pass
    three = ClusterPartition.from_labels([1, 2, 3, 3])
    try:
        build_decomposition(FOUR, three, 1, 2)
        raise AssertionError("Expected InsufficientDegreesOfFreedomError for m = 2")
    except InsufficientDegreesOfFreedomError:
        pass
    try:
        build_decomposition(FOUR, FOUR_PART, 2, 2)
        raise AssertionError("Expected ConfigError for k == k'")
    except ConfigError:
        pass
    print("  PASSED: degenerate data, m < 3 and k == k' rejected")


def test_reconstructions_round_trip():
    D = build_decomposition(FOUR, FOUR_PART, 1, 2)
    assert np.allclose(reconstruct_x_prime(D, statistic_R(D)).values, FOUR, atol=1e-10)
    assert np.allclose(reconstruct_x_phi(D, D.contrast_norm).values, FOUR, atol=1e-10)

    Y = reconstruct_x_prime(D, 2.0)
    DY = build_decomposition(Y, FOUR_PART, 1, 2)
    assert abs(statistic_R(DY) - 2.0) < 1e-8, f"R(x'(2))={statistic_R(DY)}"
    assert abs(DY.norm0 ** 2 + DY.norm1 ** 2 - 104.0) < 1e-9, "Conditioned total norm changed"

    Z = reconstruct_x_phi(D, 5.0)
    DZ = build_decomposition(Z, FOUR_PART, 1, 2)
    assert abs(DZ.contrast_norm - 5.0) < 1e-10, f"||x(5)^T v||={DZ.contrast_norm}"
    assert np.allclose(DZ.p1x, D.p1x, atol=1e-12), "P1 component changed"

    for bad in (0.0, -1.0):
        try:
            reconstruct_x_prime(D, bad)
            raise AssertionError(f"r={bad} accepted")
        except ConfigError:
            pass
    print("  PASSED: x'(r) and x(phi) reconstructions")


def test_R_is_squared_two_sample_t():
    rng = make_rng(5)
    a, b = rng.normal(size=7), rng.normal(loc=1.0, size=9)
    X = np.concatenate([a, b]).reshape(-1, 1)
    part = ClusterPartition.from_labels([1] * 7 + [2] * 9)
    R = statistic_R(build_decomposition(X, part, 1, 2))
    t = stats.ttest_ind(a, b).statistic
    assert abs(R - t ** 2) < 1e-9 * max(1.0, t ** 2), f"R={R}, t^2={t ** 2}"
    print("  PASSED: R equals the squared two-sample t statistic")


def test_R_is_F_distributed_for_fixed_clusters():
    """With clusters fixed in advance, R ~ F_{q,(m-2)q} under a common mean."""
    rng = make_rng(2024)
    labels = [1] * 6 + [2] * 4 + [3] * 5
    part = ClusterPartition.from_labels(labels)
    draws = [statistic_R(build_decomposition(rng.normal(size=(15, 2)), part, 1, 2)) for _ in range(2000)]
    ks = stats.kstest(draws, stats.f(2, 16).cdf)
    assert ks.pvalue > 0.001, f"KS p-value {ks.pvalue:.2e}"
    print("  PASSED: R follows F_{2,16} for fixed clusters")


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(5, 20), q=st.integers(1, 4))
def test_projection_identities(seed, n, q):
    """Components sum to X, are mutually orthogonal and satisfy Pythagoras."""
    rng = make_rng(seed)
    X = rng.normal(size=(n, q)) * 3.0
    labels = np.concatenate([[1, 1, 2, 2, 3], rng.integers(1, 4, size=n - 5)])
    part = ClusterPartition.from_labels(labels)
    D = build_decomposition(X, part, 1, 2)
    scale = float(np.sum(X ** 2))
    assert np.allclose(D.p0x + D.p1x + D.p2x, X, atol=1e-10 * max(1.0, np.sqrt(scale)))
    for A, B in ((D.p0x, D.p1x), (D.p0x, D.p2x), (D.p1x, D.p2x)):
        assert abs(np.sum(A * B)) < 1e-10 * scale, f"inner product {np.sum(A * B)}"
    total = D.norm0 ** 2 + D.norm1 ** 2 + D.norm2 ** 2
    assert abs(total - scale) < 1e-10 * scale, f"{total} vs {scale}"


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 100_000),
    scale=st.floats(0.1, 50.0),
    shift=st.floats(-100.0, 100.0),
)
def test_R_location_scale_invariant(seed, scale, shift):
    rng = make_rng(seed)
    X = rng.normal(size=(10, 2))
    part = ClusterPartition.from_labels([1, 1, 1, 2, 2, 2, 2, 3, 3, 3])
    R = statistic_R(build_decomposition(X, part, 1, 2))
    R2 = statistic_R(build_decomposition(scale * X + shift, part, 1, 2))
    assert abs(R - R2) <= 1e-7 * max(1.0, R), f"R={R}, transformed R={R2}"


if __name__ == "__main__":
    tests = [
        test_four_point_example,
        test_four_point_sigma_estimates,
        test_sigma_degenerate,
        test_equal_means_give_zero_R,
        test_degenerate_and_invalid_pairs,
        test_reconstructions_round_trip,
        test_R_is_squared_two_sample_t,
        test_R_is_F_distributed_for_fixed_clusters,
        test_projection_identities,
        test_R_location_scale_invariant,
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

"""Truncation sets from a re-clustering membership oracle.

The oracle answers "does the perturbed data set reproduce the observed
clustering?" at one value of the statistic. A set is recovered by evaluating
the oracle on a log-spaced grid (plus the observed statistic) and bisecting
every change of answer between neighbouring grid points. Components narrower
than one grid cell can be missed; raise ``grid_points`` when that matters.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from scipy import optimize, stats

from config import (
    DEFAULT_GRID_POINTS,
    DEFAULT_QUANTILE_EPS,
    DEFAULT_REFINE_TOL,
    MIN_GRID_POINTS,
    SCAN_WIDEN_DECADES,
)
from inference.decomposition import (
    Decomposition,
    SigmaEstimate,
    reconstruct_x_phi,
    reconstruct_x_prime,
    statistic_R,
)
from inference.distributions import TruncationSet
from inference.errors import ConfigError, EmptyTruncationError, InternalConsistencyError
from inference.hclust import ClusterPartition, hclust, normalize_linkage, partitions_equal
from tools.transforms import phi_to_r, r_to_phi

log = logging.getLogger(__name__)

SCAN_SPACES = ("r_space", "phi_space")


@dataclass
class ScanConfig:
    """Grid and refinement settings for ``scan_truncation``.

    r_lo / r_hi default to the 1e-12 and 1 - 1e-12 quantiles of F_{q,(m-2)q},
    widened by SCAN_WIDEN_DECADES around the observed statistic.
    """
    grid_points: int = DEFAULT_GRID_POINTS
    r_lo: Optional[float] = None
    r_hi: Optional[float] = None
    refine_tol: float = DEFAULT_REFINE_TOL
    n_jobs: int = 1

    def __post_init__(self):
        if int(self.grid_points) < MIN_GRID_POINTS:
            raise ConfigError(f"grid_points must be at least {MIN_GRID_POINTS}, got {self.grid_points}")
        self.grid_points = int(self.grid_points)
        for name in ("r_lo", "r_hi"):
            value = getattr(self, name)
            if value is not None and not (0 < value < math.inf):
                raise ConfigError(f"{name} must be a positive finite number, got {value}")
        if self.r_lo is not None and self.r_hi is not None and not self.r_lo < self.r_hi:
            raise ConfigError(f"r_lo ({self.r_lo}) must be below r_hi ({self.r_hi})")
        if not self.refine_tol > 0:
            raise ConfigError(f"refine_tol must be positive, got {self.refine_tol}")
        if int(self.n_jobs) == 0:
            raise ConfigError("n_jobs must be nonzero")


@dataclass
class MembershipOracle:
    """Callable t -> Cluster(x(t)) == Cluster(X) for one decomposition.

    In r_space x(t) is x'(r); in phi_space it is x(phi).
    """
    D: Decomposition
    part: ClusterPartition
    linkage: str = "average"
    K: Optional[int] = None
    space: str = "r_space"

    def __post_init__(self):
        if self.space not in SCAN_SPACES:
            raise ConfigError(f"Unknown scan space {self.space!r}")
        self.linkage = normalize_linkage(self.linkage)
        if self.K is None:
            self.K = self.part.K

    def __call__(self, t: float) -> bool:
        if not t > 0:
            return False
        if self.space == "r_space":
            x = reconstruct_x_prime(self.D, t)
        else:
            x = reconstruct_x_phi(self.D, t)
        return partitions_equal(hclust(x, self.linkage, self.K), self.part)


def map_prop1(r, D: Decomposition):
    """phi corresponding to r for a K = 2 decomposition (strictly increasing in r)."""
    return r_to_phi(r, D.norm1, D.v_norm, D.m)


def pull_back_phi_set(S: TruncationSet, D: Decomposition) -> TruncationSet:
    """S' = {r : map_prop1(r, D) in S} for a phi-space set S."""
    if S.space != "phi_space":
        raise ConfigError(f"Expected a phi_space set, got {S.space}")
    return S.map(lambda phi: phi_to_r(phi, D.norm1, D.v_norm, D.m), "r_space")


def push_r_set(S: TruncationSet, D: Decomposition) -> TruncationSet:
    if S.space != "r_space":
        raise ConfigError(f"Expected an r_space set, got {S.space}")
    return S.map(lambda r: map_prop1(r, D), "phi_space")


def observed_statistic(D: Decomposition, space: str) -> float:
    """R in r_space, ||X^T v||_2 in phi_space."""
    return statistic_R(D) if space == "r_space" else D.contrast_norm


def scan_bounds(
    D: Decomposition,
    space: str,
    cfg: ScanConfig,
    sigma: Optional[SigmaEstimate] = None,
) -> tuple[float, float]:
    """Scan range in ``space`` for decomposition D."""
    q, m = D.q, D.m
    widen = 10.0 ** SCAN_WIDEN_DECADES
    f_ref = stats.f(q, (m - 2) * q)
    r_lo = cfg.r_lo if cfg.r_lo is not None else float(f_ref.ppf(DEFAULT_QUANTILE_EPS))
    r_hi = cfg.r_hi if cfg.r_hi is not None else float(f_ref.isf(DEFAULT_QUANTILE_EPS))

    if space == "r_space":
        R = statistic_R(D)
        if cfg.r_lo is None:
            r_lo = min(r_lo, R / widen)
        if cfg.r_hi is None:
            r_hi = max(r_hi, R * widen)
        return r_lo, r_hi

    phi_obs = D.contrast_norm
    lows, highs = [phi_obs / widen], [phi_obs * widen]
    if D.norm1 > 0:
        lows.append(float(map_prop1(r_lo, D)))
        highs.append(float(map_prop1(r_hi, D)))
    if sigma is not None:
        chi_ref = stats.chi(q, scale=sigma.value * D.v_norm)
        lows.append(float(chi_ref.ppf(DEFAULT_QUANTILE_EPS)))
        highs.append(float(chi_ref.isf(DEFAULT_QUANTILE_EPS)))
    return max(min(lows), np.finfo(float).tiny), max(highs)


def _evaluate(oracle: MembershipOracle, points: np.ndarray, n_jobs: int) -> np.ndarray:
    if n_jobs == 1:
        return np.array([oracle(float(t)) for t in points], dtype=bool)
    flags = Parallel(n_jobs=n_jobs)(delayed(oracle)(float(t)) for t in points)
    return np.asarray(flags, dtype=bool)


def _refine(oracle: MembershipOracle, inside: float, outside: float, tol: float) -> float:
    """Boundary between an in-set point and an out-of-set point, bisected on log t."""
    def sign(log_t: float) -> float:
        return -1.0 if oracle(math.exp(log_t)) else 1.0

    a, b = math.log(inside), math.log(outside)
    root = optimize.bisect(sign, min(a, b), max(a, b), xtol=tol, maxiter=200)
    return math.exp(root)


def scan_truncation(
    D: Decomposition,
    X,
    part: ClusterPartition,
    space: str = "r_space",
    cfg: Optional[ScanConfig] = None,
    linkage: str = "average",
    K: Optional[int] = None,
    sigma: Optional[SigmaEstimate] = None,
) -> TruncationSet:
    """Truncation set {t : Cluster(x(t)) == Cluster(X)} in r_space or phi_space.

    ``X`` is the observed data the partition came from; it is only used to
    double-check that ``part`` is its clustering. ``sigma`` only widens the
    phi-space range to cover the rescaled chi distribution.

    Raises:
        InternalConsistencyError: the oracle rejects the observed statistic.
        EmptyTruncationError: no grid point lies in the set.
    """
    cfg = cfg or ScanConfig()
    if space not in SCAN_SPACES:
        raise ConfigError(f"Unknown scan space {space!r}; expected one of {SCAN_SPACES}")
    K = part.K if K is None else K
    if X is not None and not partitions_equal(hclust(X, linkage, K), part):
        raise InternalConsistencyError("The supplied partition is not the clustering of X")

    oracle = MembershipOracle(D, part, linkage, K, space)
    observed = observed_statistic(D, space)
    lo, hi = scan_bounds(D, space, cfg, sigma)
    grid = np.unique(np.append(np.geomspace(lo, hi, cfg.grid_points), observed))
    flags = _evaluate(oracle, grid, cfg.n_jobs)

    obs_idx = int(np.searchsorted(grid, observed))
    if not flags[obs_idx]:
        raise InternalConsistencyError(
            f"Re-clustering at the observed statistic {observed:.6g} ({space}) changed the partition"
        )

    intervals = []
    idx = 0
    while idx < grid.size:
        if not flags[idx]:
            idx += 1
            continue
        start = idx
        while idx + 1 < grid.size and flags[idx + 1]:
            idx += 1
        end = idx
        left = 0.0 if start == 0 else _refine(oracle, grid[start], grid[start - 1], cfg.refine_tol)
        right = math.inf if end == grid.size - 1 else _refine(oracle, grid[end], grid[end + 1], cfg.refine_tol)
        intervals.append((left, right))
        idx += 1

    if not intervals:
        raise EmptyTruncationError(f"No grid point in [{lo:.3g}, {hi:.3g}] reproduces the clustering")
    log.debug(
        "Scanned %s on %d points in [%.3g, %.3g]: %d interval(s)",
        space, grid.size, lo, hi, len(intervals),
    )
    return TruncationSet(tuple(intervals), space)


def boundary_count(S: TruncationSet) -> int:
    """Number of finite, nonzero interval endpoints (the refined boundaries)."""
    return sum(1 for lo, hi in S.intervals for e in (lo, hi) if 0 < e < math.inf)

"""Orthogonal decomposition X = P0 X + P1 X + P2 X for a pair of clusters.

P0 projects onto the contrast v = 1_Ck/|Ck| - 1_Ck'/|Ck'|, P1 removes the
within-cluster means of Ck and Ck', P2 is the rest. All projections are formed
by centering (O(nq)); no n x n projector is ever materialized.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config import DEGENERACY_RTOL
from inference.errors import (
    ConfigError,
    DegenerateDataError,
    DimensionError,
    InsufficientDegreesOfFreedomError,
)
from inference.hclust import ClusterPartition
from tools.datasets import DataMatrix, as_values

log = logging.getLogger(__name__)

SIGMA_MODES = ("true_sigma", "all", "clustered")


@dataclass
class Decomposition:
    """Projected components of X for the pair (k, k')."""
    v: np.ndarray
    w: np.ndarray
    m: int
    p0x: np.ndarray
    p1x: np.ndarray
    p2x: np.ndarray
    norm0: float
    norm1: float
    dir0: Optional[np.ndarray]
    dir1: Optional[np.ndarray]
    pair: tuple[int, int]
    sizes: tuple[int, int]

    @property
    def v_norm(self) -> float:
        return math.sqrt(1.0 / self.sizes[0] + 1.0 / self.sizes[1])

    @property
    def contrast_norm(self) -> float:
        """||X^T v||_2, the known-variance statistic."""
        return self.norm0 * self.v_norm

    @property
    def norm2(self) -> float:
        return float(np.linalg.norm(self.p2x))

    @property
    def q(self) -> int:
        return self.p0x.shape[1]

    def require_directions(self):
        if self.dir0 is None or self.dir1 is None:
            raise DegenerateDataError(
                f"Degenerate decomposition for pair {self.pair}: "
                f"||P0 X||={self.norm0:.3g}, ||P1 X||={self.norm1:.3g}"
            )


@dataclass
class SigmaEstimate:
    """Noise standard deviation used by the known-variance test."""
    value: float
    mode: str

    def __post_init__(self):
        if self.mode not in SIGMA_MODES:
            raise ConfigError(f"Unknown sigma mode {self.mode!r}")
        if not self.value > 0:
            raise DegenerateDataError(f"sigma estimate ({self.mode}) must be positive, got {self.value}")


def build_decomposition(
    X,
    part: ClusterPartition,
    k: int,
    k_prime: int,
    strict: bool = True,
) -> Decomposition:
    """Decompose X for clusters k and k' of ``part``.

    With ``strict=False`` zero components are allowed (their unit directions
    are left as None); reconstructions then refuse to run.
    """
    values = as_values(X)
    if values.shape[0] != part.n:
        raise DimensionError(f"Data has {values.shape[0]} rows, partition has {part.n}")
    if k == k_prime:
        raise ConfigError("The two clusters under test must differ (k != k')")

    idx_a = part.members(k)
    idx_b = part.members(k_prime)
    n_a, n_b = idx_a.size, idx_b.size
    m = n_a + n_b
    if m < 3:
        raise InsufficientDegreesOfFreedomError(
            f"Clusters {k} and {k_prime} hold {m} points; at least 3 are needed"
        )

    n = values.shape[0]
    v = np.zeros(n)
    v[idx_a] = 1.0 / n_a
    v[idx_b] = -1.0 / n_b
    w = np.zeros(n)
    w[np.concatenate([idx_a, idx_b])] = 1.0 / m

    mean_a = values[idx_a].mean(axis=0)
    mean_b = values[idx_b].mean(axis=0)
    v_sq = 1.0 / n_a + 1.0 / n_b
    p0x = np.outer(v, mean_a - mean_b) / v_sq

    p1x = np.zeros_like(values)
    p1x[idx_a] = values[idx_a] - mean_a
    p1x[idx_b] = values[idx_b] - mean_b
    p2x = values - p0x - p1x

    norm0 = float(np.linalg.norm(p0x))
    norm1 = float(np.linalg.norm(p1x))
    floor = DEGENERACY_RTOL * max(float(np.linalg.norm(values)), np.finfo(float).tiny)
    dir0 = p0x / norm0 if norm0 > floor else None
    dir1 = p1x / norm1 if norm1 > floor else None

    D = Decomposition(
        v=v, w=w, m=m, p0x=p0x, p1x=p1x, p2x=p2x,
        norm0=norm0 if dir0 is not None else 0.0,
        norm1=norm1 if dir1 is not None else 0.0,
        dir0=dir0, dir1=dir1,
        pair=(k, k_prime), sizes=(n_a, n_b),
    )
    if strict:
        D.require_directions()
    return D


def statistic_R(D: Decomposition) -> float:
    """R = (m - 2) ||P0 X||^2 / ||P1 X||^2."""
    if not D.norm1 > 0:
        raise DegenerateDataError(f"||P1 X|| is zero for pair {D.pair}; R is undefined")
    return (D.m - 2) * D.norm0 ** 2 / D.norm1 ** 2


def reconstruct_x_prime(D: Decomposition, r: float) -> DataMatrix:
    """x'(r): the data matrix whose statistic equals r, all conditioned parts fixed."""
    if not r > 0:
        raise ConfigError(f"r must be positive, got {r}")
    D.require_directions()
    total = math.sqrt(D.norm0 ** 2 + D.norm1 ** 2)
    if math.isinf(r):
        a0, a1 = 1.0, 0.0
    else:
        a0 = math.sqrt(r / (D.m - 2 + r))
        a1 = math.sqrt((D.m - 2) / (D.m - 2 + r))
    return DataMatrix((a0 * D.dir0 + a1 * D.dir1) * total + D.p2x)


def reconstruct_x_phi(D: Decomposition, phi: float) -> DataMatrix:
    """x(phi): X with the contrast statistic ||X^T v||_2 replaced by phi."""
    if not phi > 0:
        raise ConfigError(f"phi must be positive, got {phi}")
    if D.dir0 is None:
        raise DegenerateDataError(f"Cluster means of pair {D.pair} coincide; x(phi) is undefined")
    return DataMatrix((phi / D.v_norm) * D.dir0 + D.p1x + D.p2x)


# ---------------------------------------------------------------------------
# Plug-in noise estimates
# ---------------------------------------------------------------------------

def sigma_hat_all(X) -> SigmaEstimate:
    """sigma^2 = sum_i ||X_i - mean||^2 / ((n - 1) q): the data as one cluster."""
    values = as_values(X)
    n, q = values.shape
    if n < 2:
        raise DimensionError("sigma_hat_all needs at least 2 rows")
    ss = float(((values - values.mean(axis=0)) ** 2).sum())
    if ss <= (DEGENERACY_RTOL * np.linalg.norm(values)) ** 2:
        raise DegenerateDataError("All rows are identical; sigma_hat_all is zero")
    return SigmaEstimate(math.sqrt(ss / ((n - 1) * q)), "all")


def sigma_hat_clustered(X, part: ClusterPartition) -> SigmaEstimate:
    """Pooled within-cluster estimate, denominator (n - K) q."""
    values = as_values(X)
    n, q = values.shape
    if not n > part.K:
        raise DimensionError(f"sigma_hat_clustered needs n > K (n={n}, K={part.K})")
    ss = 0.0
    for k in range(1, part.K + 1):
        rows = values[part.members(k)]
        ss += float(((rows - rows.mean(axis=0)) ** 2).sum())
    if ss <= (DEGENERACY_RTOL * np.linalg.norm(values)) ** 2:
        raise DegenerateDataError("No within-cluster variation; sigma_hat_clustered is zero")
    return SigmaEstimate(math.sqrt(ss / ((n - part.K) * q)), "clustered")


def sigma_summary(X, part: ClusterPartition) -> dict[str, float]:
    """Both plug-in estimates side by side."""
    return {
        "sigma_hat_all": sigma_hat_all(X).value,
        "sigma_hat_clustered": sigma_hat_clustered(X, part).value,
    }


def resolve_sigma(mode: str, X, part: ClusterPartition, sigma: Optional[float] = None) -> SigmaEstimate:
    """SigmaEstimate for a known-variance method tag ('true_sigma', 'all', 'clustered')."""
    if mode == "true_sigma":
        if sigma is None:
            raise ConfigError("The true-sigma method needs a sigma value")
        return SigmaEstimate(float(sigma), "true_sigma")
    if mode == "all":
        return sigma_hat_all(X)
    if mode == "clustered":
        return sigma_hat_clustered(X, part)
    raise ConfigError(f"Unknown sigma mode {mode!r}")

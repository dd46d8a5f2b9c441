"""Distribution kernels for the selective tests.

Truncated CDFs are evaluated from per-interval probability masses kept in log
space. An interval lying above the median is measured from the survival side,
one below it from the CDF side, so that masses deep in either tail keep their
relative precision. When double precision underflows, the interval mass is
recomputed with mpmath's regularized incomplete gamma / beta functions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import mpmath as mp
import numpy as np
from scipy import integrate, special, stats

from config import MIN_INTERVAL_MASS
from inference.errors import ConfigError, EmptyTruncationError, NumericError
from tools.datasets import make_rng, open_uniforms
from tools.transforms import li_transform, r_to_z, z_to_r

log = logging.getLogger(__name__)

SPACES = ("r_space", "phi_space", "z_space", "li_space")
MP_DPS = 60

# ---------------------------------------------------------------------------
# Truncation sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncationSet:
    """A finite union of disjoint open intervals; ``math.inf`` marks an unbounded end."""
    intervals: tuple[tuple[float, float], ...]
    space: str = "r_space"

    def __post_init__(self):
        if self.space not in SPACES:
            raise ConfigError(f"Unknown space {self.space!r}")
        cleaned = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        if not cleaned:
            raise EmptyTruncationError(f"Empty truncation set in {self.space}")
        for lo, hi in cleaned:
            if not (0.0 <= lo < hi):
                raise ConfigError(f"Bad interval ({lo}, {hi})")
            if self.space == "z_space" and hi > 1.0:
                raise ConfigError(f"z-space interval ({lo}, {hi}) leaves (0, 1)")
        for (_, hi), (lo, _) in zip(cleaned, cleaned[1:]):
            if lo < hi:
                raise ConfigError("Intervals must be sorted and disjoint")
        object.__setattr__(self, "intervals", cleaned)

    @classmethod
    def full(cls, space: str = "r_space") -> "TruncationSet":
        return cls(((0.0, 1.0 if space == "z_space" else math.inf),), space)

    def __len__(self) -> int:
        return len(self.intervals)

    def contains(self, x: float) -> bool:
        return self.index_of(x) is not None

    def index_of(self, x: float) -> Optional[int]:
        """Index of the interval holding x (closed ends), or None."""
        for i, (lo, hi) in enumerate(self.intervals):
            if lo <= x <= hi:
                return i
        return None

    def map(self, fn: Callable[[float], float], space: str) -> "TruncationSet":
        """Image under an increasing map."""
        return TruncationSet(tuple((float(fn(lo)), float(fn(hi))) for lo, hi in self.intervals), space)

    @property
    def lower(self) -> float:
        return self.intervals[0][0]

    @property
    def upper(self) -> float:
        return self.intervals[-1][1]

    def to_list(self) -> list[list[Optional[float]]]:
        """JSON-friendly intervals; an unbounded end becomes None."""
        return [[lo, None if math.isinf(hi) else hi] for lo, hi in self.intervals]


def beta_transform_set(S: TruncationSet, m: int) -> TruncationSet:
    """S'' = {z in (0,1): (m-2) z/(1-z) in S'}; interval (a, b) -> (a/(m-2+a), b/(m-2+b))."""
    if m < 3:
        raise ConfigError(f"m must be at least 3, got {m}")
    return S.map(lambda r: r_to_z(r, m), "z_space")


def inverse_beta_transform_set(S: TruncationSet, m: int) -> TruncationSet:
    return S.map(lambda z: z_to_r(z, m), "r_space")


def li_transform_set(S: TruncationSet, q: int, m: int) -> TruncationSet:
    """Image of an r-space set under Li's chi^2 argument map (k = q, l = (m-2) q)."""
    return S.map(lambda t: li_transform(t, q, (m - 2) * q), "li_space")


# ---------------------------------------------------------------------------
# Untruncated kernels
# ---------------------------------------------------------------------------

def f_dist(d1: int, d2: int):
    return stats.f(d1, d2)


def f_cdf(t: float, d1: int, d2: int) -> float:
    """F_{d1,d2} CDF through the regularized incomplete beta function."""
    if t <= 0:
        return 0.0
    if math.isinf(t):
        return 1.0
    return float(special.betainc(d1 / 2, d2 / 2, d1 * t / (d1 * t + d2)))


def f_cdf_li(t: float, k: int, l: int) -> float:
    """Li's chi^2 approximation to the F_{k,l} CDF (accurate for fixed k, large l)."""
    if t <= 0:
        return 0.0
    return float(stats.chi2.cdf(li_transform(t, k, l), k))


def quadrature_cdf(density: Callable[[float], float], x: float, lower: float = 0.0) -> float:
    """Reference CDF by adaptive Gauss-Kronrod integration of a density."""
    if x <= lower:
        return 0.0
    value, _ = integrate.quad(density, lower, x, epsabs=1e-14, epsrel=1e-12, limit=400)
    return float(value)


# ---------------------------------------------------------------------------
# Log-space interval masses
# ---------------------------------------------------------------------------

def _log1mexp(x: float) -> float:
    """log(1 - exp(x)) for x <= 0."""
    if x >= 0:
        return -math.inf
    if x > -math.log(2):
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def _mp_log_mass(dist, lo: float, hi: float) -> float:
    """High-precision log P(lo < Z < hi) for the chi2, chi, f, beta and norm families."""
    name = dist.dist.name
    args = dist.args
    scale = dist.kwds.get("scale", 1.0)
    with mp.workdps(MP_DPS):
        a, b = mp.mpf(lo), (mp.inf if math.isinf(hi) else mp.mpf(hi))
        if name == "chi2":
            mass = mp.gammainc(mp.mpf(args[0]) / 2, a / 2, b / 2, regularized=True)
        elif name == "chi":
            c = mp.mpf(scale)
            mass = mp.gammainc(mp.mpf(args[0]) / 2, (a / c) ** 2 / 2, (b / c) ** 2 / 2, regularized=True)
        elif name == "f":
            d1, d2 = mp.mpf(args[0]), mp.mpf(args[1])
            y_lo = d1 * a / (d1 * a + d2)
            y_hi = mp.mpf(1) if b == mp.inf else d1 * b / (d1 * b + d2)
            mass = mp.betainc(d1 / 2, d2 / 2, y_lo, y_hi, regularized=True)
        elif name == "beta":
            mass = mp.betainc(mp.mpf(args[0]), mp.mpf(args[1]), a, b, regularized=True)
        elif name == "norm":
            mass = mp.ncdf(b) - mp.ncdf(a)
        else:
            raise NumericError(f"No high-precision fallback for the {name} distribution")
        if mass <= 0:
            return -math.inf
        return float(mp.log(mass))


def log_interval_mass(dist, lo: float, hi: float, median: Optional[float] = None) -> float:
    """log P(lo < Z < hi) for a frozen scipy distribution, stable in both tails."""
    if hi <= lo:
        return -math.inf
    median = float(dist.median()) if median is None else median
    if lo >= median:
        top, bottom = float(dist.logsf(lo)), float(dist.logsf(hi))
    else:
        top, bottom = float(dist.logcdf(hi)), float(dist.logcdf(lo))
    if math.isfinite(top):
        value = top + _log1mexp(bottom - top)
        if math.isfinite(value):
            return value
    log.debug("Interval (%g, %g) underflows for %s; using mpmath", lo, hi, dist.dist.name)
    return _mp_log_mass(dist, lo, hi)


def _log_sum(terms: Sequence[float]) -> float:
    finite = [t for t in terms if t > -math.inf]
    return float(special.logsumexp(finite)) if finite else -math.inf


def truncated_log_masses(x: float, dist, S: TruncationSet) -> tuple[float, float]:
    """(log P(Z <= x, Z in S), log P(Z > x, Z in S))."""
    median = float(dist.median())
    below, above = [], []
    for lo, hi in S.intervals:
        if hi <= x:
            below.append(log_interval_mass(dist, lo, hi, median))
        elif lo >= x:
            above.append(log_interval_mass(dist, lo, hi, median))
        else:
            below.append(log_interval_mass(dist, lo, x, median))
            above.append(log_interval_mass(dist, x, hi, median))
    return _log_sum(below), _log_sum(above)


def _normalized(x: float, dist, S: TruncationSet) -> tuple[float, float]:
    log_below, log_above = truncated_log_masses(x, dist, S)
    log_total = np.logaddexp(log_below, log_above)
    if not log_total >= math.log(MIN_INTERVAL_MASS):
        raise EmptyTruncationError(
            f"Truncation set carries no mass under {dist.dist.name} (log mass {log_total:.1f})"
        )
    return log_below - log_total, log_above - log_total


def truncated_cdf(x: float, dist, S: TruncationSet) -> float:
    """P(Z <= x | Z in S)."""
    log_cdf, _ = _normalized(x, dist, S)
    return float(min(max(math.exp(log_cdf), 0.0), 1.0))


def truncated_sf(x: float, dist, S: TruncationSet) -> float:
    """P(Z > x | Z in S), computed directly so small p-values keep relative precision."""
    _, log_sf = _normalized(x, dist, S)
    return float(min(max(math.exp(log_sf), 0.0), 1.0))


# ---------------------------------------------------------------------------
# Truncated normal proposal
# ---------------------------------------------------------------------------

def _standardized_bounds(mean: float, alpha: float, lo: float, hi: float) -> tuple[float, float]:
    if not alpha > 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    if not lo < hi:
        raise ConfigError(f"Empty proposal support [{lo}, {hi}]")
    return (lo - mean) / alpha, (hi - mean) / alpha


def tn_sample(
    mean: float,
    alpha: float,
    lo: float,
    hi: float,
    n: int,
    seed: int | np.random.Generator,
) -> np.ndarray:
    """n draws of N(mean, alpha^2) truncated to [lo, hi] by inverse CDF."""
    a, b = _standardized_bounds(mean, alpha, lo, hi)
    if log_interval_mass(stats.norm(), a, b) < math.log(MIN_INTERVAL_MASS):
        raise NumericError(f"Proposal interval [{lo}, {hi}] has negligible mass under N({mean}, {alpha}^2)")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    u = open_uniforms(rng, int(n))
    draws = stats.truncnorm.ppf(u, a, b, loc=mean, scale=alpha)
    return np.clip(draws, lo, hi)


def tn_log_density(z, mean: float, alpha: float, lo: float, hi: float):
    """Log density of the truncated normal on [lo, hi]; -inf outside the support."""
    a, b = _standardized_bounds(mean, alpha, lo, hi)
    z = np.asarray(z, dtype=float)
    out = stats.truncnorm.logpdf(z, a, b, loc=mean, scale=alpha)
    out = np.where((z < lo) | (z > hi), -np.inf, out)
    return out[()] if out.ndim == 0 else out

"""Selective p-values for the difference between two estimated cluster means.

Three procedures share one report type:

- ``p_value_exact_k2``: the truncated-F p-value for K = 2, with the
  truncation set from an r-space scan or a phi-space scan pulled back.
- ``p_value_importance``: the same p-value by importance sampling on the Beta
  scale, with per-draw re-clustering (any K, any linkage).
- ``p_value_gao``: the known-variance truncated-chi p-value, with the true
  sigma or a plug-in estimate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Optional

import numpy as np
from joblib import Parallel, delayed
from scipy import special, stats

from config import (
    DEFAULT_IS_DRAWS,
    DEFAULT_IS_PILOT_DRAWS,
    DEFAULT_IS_TARGET,
    DEFAULT_LINKAGE,
    DEFAULT_SEED,
    IS_ACCEPT_WINDOW,
    IS_ALPHA_GRID,
    LI_MIN_DENOM_DF,
    MIN_IS_DRAWS,
)
from inference.decomposition import SigmaEstimate, build_decomposition, statistic_R
from inference.distributions import (
    TruncationSet,
    f_dist,
    log_interval_mass,
    li_transform_set,
    tn_log_density,
    tn_sample,
    truncated_sf,
)
from inference.errors import (
    ConfigError,
    DegenerateDataError,
    EmptyTruncationError,
    EstimationFailureError,
    InternalConsistencyError,
    NumericError,
)
from inference.hclust import ClusterPartition
from inference.truncation import (
    MembershipOracle,
    ScanConfig,
    boundary_count,
    pull_back_phi_set,
    scan_truncation,
)
from tools.datasets import make_rng
from tools.transforms import li_transform, r_to_z, z_to_r

log = logging.getLogger(__name__)

METHOD_TAGS = ("exact_k2", "importance", "gao_true", "gao_all", "gao_clustered")
TAIL_METHODS = ("exact", "li", "auto")
EXACT_PATHS = ("r", "phi")


@dataclass
class ISConfig:
    """Importance-sampling settings. ``alpha=None`` tunes the proposal width."""
    n_draws: int = DEFAULT_IS_DRAWS
    alpha: Optional[float] = None
    target_inset: float = DEFAULT_IS_TARGET
    seed: int = DEFAULT_SEED
    pilot_draws: int = DEFAULT_IS_PILOT_DRAWS
    alpha_grid: tuple[float, ...] = IS_ALPHA_GRID
    n_jobs: int = 1

    def __post_init__(self):
        if int(self.n_draws) < MIN_IS_DRAWS:
            raise ConfigError(f"n_draws must be at least {MIN_IS_DRAWS}, got {self.n_draws}")
        if not 0 < self.target_inset < 1:
            raise ConfigError(f"target_inset must lie in (0, 1), got {self.target_inset}")
        if self.alpha is not None and not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if int(self.pilot_draws) < 1 or not self.alpha_grid:
            raise ConfigError("Tuning needs pilot_draws >= 1 and a nonempty alpha grid")
        self.n_draws = int(self.n_draws)
        self.pilot_draws = int(self.pilot_draws)


@dataclass
class PValueReport:
    """Outcome of one selective test."""
    p: float
    statistic: float
    method: str
    pair: tuple[int, int] = (1, 2)
    set_summary: dict[str, Any] = field(default_factory=dict)
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHOD_TAGS:
            raise ConfigError(f"Unknown method tag {self.method!r}")
        if math.isnan(self.p):
            raise NumericError(f"{self.method} produced a NaN p-value")
        self.p = clamp_probability(self.p)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["pair"] = list(self.pair)
        return out


def clamp_probability(p: float) -> float:
    return float(min(max(p, 0.0), 1.0))


def _set_summary(S: TruncationSet, dist) -> dict[str, Any]:
    median = float(dist.median())
    log_mass = special.logsumexp([log_interval_mass(dist, lo, hi, median) for lo, hi in S.intervals])
    return {
        "space": S.space,
        "interval_count": len(S),
        "boundary_count": boundary_count(S),
        "total_mass": float(math.exp(log_mass)),
        "intervals": S.to_list(),
    }


# ---------------------------------------------------------------------------
# Exact path, K = 2
# ---------------------------------------------------------------------------

def _li_tail(R: float, S_prime: TruncationSet, q: int, m: int) -> float:
    """Truncated chi^2_q survival at Li's transform of R over the transformed set."""
    k, l = q, (m - 2) * q
    return truncated_sf(float(li_transform(R, k, l)), stats.chi2(k), li_transform_set(S_prime, q, m))


def p_value_exact_k2(
    X,
    part: ClusterPartition,
    cfg: Optional[ScanConfig] = None,
    truncation: Optional[TruncationSet] = None,
    path: str = "r",
    tail_method: str = "exact",
    linkage: str = DEFAULT_LINKAGE,
) -> PValueReport:
    """P' = P(F > R | F in S') with F ~ F_{q,(m-2)q}, for the two clusters of ``part``.

    Args:
        cfg: Scan settings (ignored when ``truncation`` is given).
        truncation: Precomputed S' (r_space) or S (phi_space, pulled back).
        path: 'r' scans x'(r) directly, 'phi' scans x(phi) and pulls back.
        tail_method: 'exact' (log-space truncated F, the default), 'li'
            (truncated chi^2 via Li's approximation, accurate only for large
            (m-2)q) or 'auto' (exact, falling back to Li only when every
            F interval mass underflows and (m-2)q >= LI_MIN_DENOM_DF).
    """
    if part.K != 2:
        raise ConfigError(f"The exact path needs K = 2 clusters, got K = {part.K}")
    if path not in EXACT_PATHS:
        raise ConfigError(f"Unknown path {path!r}; expected one of {EXACT_PATHS}")
    if tail_method not in TAIL_METHODS:
        raise ConfigError(f"Unknown tail method {tail_method!r}; expected one of {TAIL_METHODS}")

    D = build_decomposition(X, part, 1, 2)
    R = statistic_R(D)
    q, m = D.q, D.m

    if truncation is None:
        space = "r_space" if path == "r" else "phi_space"
        truncation = scan_truncation(D, X, part, space, cfg, linkage, 2)
    S_prime = pull_back_phi_set(truncation, D) if truncation.space == "phi_space" else truncation
    if S_prime.space != "r_space":
        raise ConfigError(f"Truncation set must be in r_space or phi_space, got {S_prime.space}")

    k, l = q, (m - 2) * q
    dist = f_dist(k, l)
    untruncated = float(dist.sf(R))
    use_li = tail_method == "li"
    if use_li:
        p = _li_tail(R, S_prime, q, m)
    else:
        try:
            p = truncated_sf(R, dist, S_prime)
        except EmptyTruncationError:
            if tail_method != "auto" or l < LI_MIN_DENOM_DF:
                raise
            log.warning("Truncated F mass underflows at R=%.6g; using the chi^2 tail approximation (l=%d)", R, l)
            p = _li_tail(R, S_prime, q, m)
            use_li = True

    return PValueReport(
        p=p,
        statistic=R,
        method="exact_k2",
        pair=(1, 2),
        set_summary=_set_summary(S_prime, dist),
        diagnostics={
            "tail_method": "li" if use_li else "exact",
            "path": "phi" if truncation.space == "phi_space" else path,
            "untruncated_p": untruncated,
            "m": m,
            "df": [k, l],
        },
    )


# ---------------------------------------------------------------------------
# Importance sampling, any K
# ---------------------------------------------------------------------------

def _membership_flags(in_set: Callable[[float], bool], r: np.ndarray, n_jobs: int) -> np.ndarray:
    if n_jobs == 1:
        return np.array([bool(in_set(float(t))) for t in r], dtype=bool)
    flags = Parallel(n_jobs=n_jobs)(delayed(in_set)(float(t)) for t in r)
    return np.asarray(flags, dtype=bool)


def _tune_alpha(in_set, z_obs: float, m: int, cfg: ISConfig) -> tuple[float, dict[float, float], bool]:
    """Pick the proposal width whose pilot in-set fraction is nearest the target."""
    fractions = {}
    for i, alpha in enumerate(cfg.alpha_grid):
        z = tn_sample(z_obs, alpha, 0.0, 1.0, cfg.pilot_draws, make_rng(cfg.seed, 1, i))
        fractions[alpha] = float(_membership_flags(in_set, z_to_r(z, m), cfg.n_jobs).mean())
        log.debug("alpha=%g: pilot in-set fraction %.3f", alpha, fractions[alpha])

    lo, hi = IS_ACCEPT_WINDOW
    accepted = {a: f for a, f in fractions.items() if lo <= f <= hi}
    pool = accepted or fractions
    # ties go to the wider proposal
    alpha = min(pool, key=lambda a: (abs(pool[a] - cfg.target_inset), -a))
    if not accepted:
        log.warning(
            "No proposal width puts the in-set fraction in [%.1f, %.1f]; using alpha=%g (fraction %.3f)",
            lo, hi, alpha, fractions[alpha],
        )
    return alpha, fractions, bool(accepted)


def p_value_importance(
    X,
    part: ClusterPartition,
    pair: tuple[int, int],
    is_cfg: Optional[ISConfig] = None,
    scan_cfg: Optional[ScanConfig] = None,
    membership: Optional[Callable[[float], bool]] = None,
    linkage: str = DEFAULT_LINKAGE,
) -> PValueReport:
    """Self-normalized importance-sampling estimate of P' for clusters ``pair``.

    Draws Z from N(z_obs, alpha^2) truncated to [0, 1], where z = R/(m-2+R),
    weights them by the Beta(q/2, (m-2)q/2) density over the proposal density
    and keeps the draws whose r = (m-2)Z/(1-Z) reproduces the clustering.
    ``membership`` replaces the re-clustering oracle (r -> bool).
    ``scan_cfg`` is accepted for signature symmetry; no interval list is built.

    Raises:
        EstimationFailureError: no draw falls in the truncation set.
    """
    cfg = is_cfg or ISConfig()
    k, k_prime = pair
    D = build_decomposition(X, part, k, k_prime)
    R = statistic_R(D)
    q, m = D.q, D.m

    if membership is None:
        oracle = MembershipOracle(D, part, linkage, part.K, "r_space")
        if not oracle(R):
            raise InternalConsistencyError("Re-clustering at the observed R changed the partition")
        in_set = oracle
    else:
        in_set = membership

    z_obs = float(r_to_z(R, m))
    if cfg.alpha is None:
        alpha, fractions, in_window = _tune_alpha(in_set, z_obs, m, cfg)
    else:
        alpha, fractions, in_window = cfg.alpha, {}, True

    z = tn_sample(z_obs, alpha, 0.0, 1.0, cfg.n_draws, make_rng(cfg.seed, 2))
    inside = _membership_flags(in_set, z_to_r(z, m), cfg.n_jobs)
    if not inside.any():
        raise EstimationFailureError(
            f"None of {cfg.n_draws} draws (alpha={alpha:g}) fell in the truncation set for pair {pair}"
        )

    target = stats.beta(q / 2, (m - 2) * q / 2)
    log_w = target.logpdf(z[inside]) - tn_log_density(z[inside], z_obs, alpha, 0.0, 1.0)
    if not np.isfinite(log_w).all():
        raise NumericError("Non-finite importance weight")
    upper = (z[inside] >= z_obs).astype(float)

    w = np.exp(log_w - log_w.max())
    w_norm = w / w.sum()
    p = float(np.sum(w_norm * upper))
    std_error = float(math.sqrt(np.sum(w_norm ** 2 * (upper - p) ** 2)))
    ess = float(w.sum() ** 2 / np.sum(w ** 2))

    return PValueReport(
        p=p,
        statistic=R,
        method="importance",
        pair=(k, k_prime),
        set_summary={"space": "z_space", "inset_fraction": float(inside.mean())},
        diagnostics={
            "alpha": alpha,
            "alpha_in_window": in_window,
            "pilot_fractions": {f"{a:g}": f for a, f in fractions.items()},
            "n_draws": cfg.n_draws,
            "n_inset": int(inside.sum()),
            "inset_fraction": float(inside.mean()),
            "ess": ess,
            "std_error": std_error,
            "z_obs": z_obs,
        },
    )


# ---------------------------------------------------------------------------
# Known-variance baselines
# ---------------------------------------------------------------------------

def p_value_gao(
    X,
    part: ClusterPartition,
    pair: tuple[int, int],
    sigma: SigmaEstimate | float,
    scan_cfg: Optional[ScanConfig] = None,
    truncation: Optional[TruncationSet] = None,
    linkage: str = DEFAULT_LINKAGE,
) -> PValueReport:
    """P = P(phi > ||X^T v||_2 | phi in S) with phi ~ sigma ||v||_2 chi_q.

    A bare float ``sigma`` is taken as the true noise level.
    """
    if not isinstance(sigma, SigmaEstimate):
        sigma = SigmaEstimate(float(sigma), "true_sigma")
    k, k_prime = pair
    D = build_decomposition(X, part, k, k_prime, strict=False)
    phi_obs = D.contrast_norm
    if D.dir0 is None:
        raise DegenerateDataError(f"Clusters {k} and {k_prime} have identical means; the contrast is degenerate")

    if truncation is None:
        truncation = scan_truncation(D, X, part, "phi_space", scan_cfg, linkage, part.K, sigma=sigma)
    if truncation.space != "phi_space":
        raise ConfigError(f"Known-variance test needs a phi_space set, got {truncation.space}")

    dist = stats.chi(D.q, scale=sigma.value * D.v_norm)
    p = truncated_sf(phi_obs, dist, truncation)
    return PValueReport(
        p=p,
        statistic=phi_obs,
        method=f"gao_{sigma.mode.replace('true_sigma', 'true')}",
        pair=(k, k_prime),
        set_summary=_set_summary(truncation, dist),
        diagnostics={"sigma": sigma.value, "sigma_mode": sigma.mode, "untruncated_p": float(dist.sf(phi_obs))},
    )

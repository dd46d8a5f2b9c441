"""Tables computed from simulation records: power, uniformity, QQ points."""

from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import stats

from config import DEFAULT_ALPHA_LEVEL
from experiments.simulation import TrialRecord, records_for
from inference.errors import UndefinedPowerError

log = logging.getLogger(__name__)


def empirical_power(records: Sequence[TrialRecord], method: str, alpha_level: float = DEFAULT_ALPHA_LEVEL) -> float:
    """Rejection fraction (p <= alpha) among the trials whose null is false."""
    pvals = [r.pvalues[method] for r in records_for(list(records), method) if not r.null_true]
    if not pvals:
        raise UndefinedPowerError(f"No null-false trials with a {method} p-value")
    return float(np.mean(np.asarray(pvals) <= alpha_level))


def uniformity_report(
    records: Sequence[TrialRecord],
    method: str,
    alpha_level: float = DEFAULT_ALPHA_LEVEL,
) -> dict[str, float]:
    """KS distance to Uniform(0, 1) and the rejection rate with a 95% Clopper-Pearson interval.

    Only null-true records count; the others are reported as excluded
    together with records where the method failed.
    """
    usable = [r for r in records_for(list(records), method) if r.null_true]
    excluded = len(records) - len(usable)
    n = len(usable)
    if n == 0:
        nan = math.nan
        return {"method": method, "n": 0, "excluded": excluded, "ks_statistic": nan,
                "ks_pvalue": nan, "rejection_rate": nan, "ci_low": nan, "ci_high": nan}

    pvals = np.array([r.pvalues[method] for r in usable])
    ks = stats.kstest(pvals, "uniform")
    rejections = int(np.sum(pvals <= alpha_level))
    ci = stats.binomtest(rejections, n).proportion_ci(confidence_level=0.95, method="exact")
    return {
        "method": method,
        "n": n,
        "excluded": excluded,
        "ks_statistic": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
        "rejection_rate": rejections / n,
        "ci_low": float(ci.low),
        "ci_high": float(ci.high),
    }


def qq_points(records: Sequence[TrialRecord], method: str) -> pd.DataFrame:
    """Sorted p-values against uniform plotting positions i / (n + 1)."""
    pvals = np.sort([r.pvalues[method] for r in records_for(list(records), method)])
    n = pvals.size
    return pd.DataFrame({
        "theoretical": np.arange(1, n + 1) / (n + 1),
        "empirical": pvals,
    })


def pvalue_table(records: Sequence[TrialRecord], methods: Sequence[str]) -> pd.DataFrame:
    """One row per trial per method; failed evaluations have p = NaN and an error message."""
    rows = []
    for r in records:
        for method in methods:
            diag = r.diagnostics.get(method, {})
            rows.append({
                "trial": r.trial,
                "delta": r.delta,
                "k": r.pair[0],
                "k_prime": r.pair[1],
                "null_true": r.null_true,
                "method": method,
                "p": r.pvalues.get(method, math.nan),
                "alpha": diag.get("alpha", math.nan),
                "ess": diag.get("ess", math.nan),
                "error": r.failures.get(method, ""),
            })
    return pd.DataFrame(rows)


def power_table(
    records: Sequence[TrialRecord],
    methods: Sequence[str],
    alpha_level: float = DEFAULT_ALPHA_LEVEL,
) -> pd.DataFrame:
    """Per delta and method: power among null-false trials and the overall rejection rate."""
    rows = []
    deltas = sorted({r.delta for r in records})
    for delta in deltas:
        at_delta = [r for r in records if r.delta == delta]
        for method in methods:
            usable = records_for(at_delta, method)
            pvals = np.array([r.pvalues[method] for r in usable])
            try:
                power = empirical_power(usable, method, alpha_level)
            except UndefinedPowerError:
                power = math.nan
            rows.append({
                "delta": delta,
                "method": method,
                "n_trials": len(usable),
                "n_null_false": sum(not r.null_true for r in usable),
                "excluded": len(at_delta) - len(usable),
                "power": power,
                "rejection_rate": float(np.mean(pvals <= alpha_level)) if pvals.size else math.nan,
            })
    return pd.DataFrame(rows)


def uniformity_table(
    records: Sequence[TrialRecord],
    methods: Sequence[str],
    alpha_level: float = DEFAULT_ALPHA_LEVEL,
) -> pd.DataFrame:
    return pd.DataFrame([uniformity_report(records, m, alpha_level) for m in methods])

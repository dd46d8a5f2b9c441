"""Simulation harness: null calibration, power curves and misspecified noise.

Every trial is a pure function of (config, delta index, trial index): its seed
is derived from the experiment seed and those two indices, so any subset of
trials can be rerun on its own and parallel runs match sequential ones.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np
from joblib import Parallel, delayed

from config import DEFAULT_ALPHA_LEVEL, DEFAULT_SEED, EXPERIMENT_DEFAULTS_PATH
from inference.decomposition import build_decomposition, resolve_sigma
from inference.errors import ClusterInferenceError, ConfigError, DimensionError
from inference.hclust import ClusterPartition, hclust, normalize_linkage
from inference.pvalues import ISConfig, p_value_exact_k2, p_value_gao, p_value_importance
from inference.truncation import ScanConfig, pull_back_phi_set, scan_truncation
from tools.datasets import (
    MISSPECIFIED_KINDS,
    TrueLabels,
    derive_seed,
    gen_misspecified,
    gen_mixture,
    make_rng,
    setting_spec,
)

log = logging.getLogger(__name__)

SCENARIOS = (
    "type1_k2", "type1_k3",
    "power_setting1", "power_setting2", "power_setting3",
    "misspec_t5", "misspec_t10", "misspec_noniso",
    "misspec_t5_k3", "misspec_t10_k3", "misspec_noniso_k3",
    "custom",
)
METHODS = ("proposed", "gao_true", "gao_all", "gao_clustered")
SETTINGS = ("null", "setting1", "setting2", "setting3")
NOISE_KINDS = ("gaussian",) + MISSPECIFIED_KINDS
SIGMA_MODE = {"gao_true": "true_sigma", "gao_all": "all", "gao_clustered": "clustered"}


@dataclass
class ExperimentConfig:
    scenario: str = "custom"
    n: int = 30
    q: int = 2
    sigma: float = 1.0
    K: int = 2
    linkage: str = "average"
    trials: int = 100
    delta_grid: list[float] = field(default_factory=lambda: [0.0])
    methods: list[str] = field(default_factory=lambda: ["proposed"])
    alpha_level: float = DEFAULT_ALPHA_LEVEL
    seed: int = DEFAULT_SEED
    setting: str = "null"
    noise: str = "gaussian"
    n_draws: int = 8000
    grid_points: int = 2048
    refine_tol: float = 1e-8

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"Unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if int(self.trials) < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if not 0 < self.alpha_level < 1:
            raise ConfigError(f"alpha_level must lie in (0, 1), got {self.alpha_level}")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown or not self.methods:
            raise ConfigError(f"Unknown method(s) {unknown}; expected a subset of {METHODS}")
        if self.setting not in SETTINGS:
            raise ConfigError(f"Unknown setting {self.setting!r}")
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"Unknown noise kind {self.noise!r}")
        if self.noise != "gaussian" and self.setting != "null":
            raise ConfigError("Misspecified noise is only simulated under the null")
        if not 2 <= int(self.K) < int(self.n):
            raise DimensionError(f"K={self.K} out of range for n={self.n}")
        if not self.delta_grid or any(d < 0 for d in self.delta_grid):
            raise ConfigError(f"delta_grid must be nonempty and nonnegative, got {self.delta_grid}")
        self.linkage = normalize_linkage(self.linkage)
        self.trials, self.K, self.n, self.q = int(self.trials), int(self.K), int(self.n), int(self.q)
        self.delta_grid = [float(d) for d in self.delta_grid]

    def scan_config(self) -> ScanConfig:
        return ScanConfig(grid_points=self.grid_points, refine_tol=self.refine_tol)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class TrialRecord:
    """Outcome of one simulated data set."""
    trial: int
    delta: float
    pair: tuple[int, int]
    null_true: bool
    pvalues: dict[str, float] = field(default_factory=dict)
    diagnostics: dict[str, dict] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return bool(self.failures)


def load_scenarios(path: str = EXPERIMENT_DEFAULTS_PATH) -> dict[str, dict]:
    """Scenario presets merged over the shared defaults."""
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    defaults = raw.get("defaults", {})
    return {name: {**defaults, **preset} for name, preset in raw["scenarios"].items()}


def scenario_config(name: str, path: str = EXPERIMENT_DEFAULTS_PATH, **overrides) -> ExperimentConfig:
    """ExperimentConfig for a named preset; keyword overrides that are None are ignored."""
    presets = load_scenarios(path)
    if name not in presets:
        raise ConfigError(f"Unknown scenario {name!r}; expected one of {sorted(presets)}")
    values = {**presets[name], **{k: v for k, v in overrides.items() if v is not None}}
    return ExperimentConfig(scenario=name, **values)


def null_holds(labels: TrueLabels, part: ClusterPartition, pair: tuple[int, int]) -> bool:
    """True iff every point of C_k and C_k' comes from one generating component."""
    truth = np.asarray(labels.labels)
    if truth.shape[0] != part.n:
        raise DimensionError(f"{truth.shape[0]} true labels for {part.n} points")
    rows = np.concatenate([part.members(pair[0]), part.members(pair[1])])
    return bool(np.unique(truth[rows]).size == 1)


def choose_pair(K: int, seed: int) -> tuple[int, int]:
    """(1, 2) for K = 2, otherwise a uniformly random pair k < k'."""
    if K == 2:
        return 1, 2
    k, k_prime = make_rng(seed, 1).choice(K, size=2, replace=False) + 1
    return int(min(k, k_prime)), int(max(k, k_prime))


def simulate_data(cfg: ExperimentConfig, delta: float, seed: int):
    if cfg.noise == "gaussian":
        spec = setting_spec(cfg.setting, delta, n=cfg.n, sigma=cfg.sigma, q=cfg.q)
        return gen_mixture(spec, seed)
    X = gen_misspecified(cfg.noise, cfg.n, cfg.q, seed)
    return X, TrueLabels(np.ones(cfg.n, dtype=int))


def run_trial(cfg: ExperimentConfig, delta_index: int, trial: int) -> TrialRecord:
    delta = cfg.delta_grid[delta_index]
    seed = derive_seed(cfg.seed, delta_index, trial)
    X, labels = simulate_data(cfg, delta, seed)
    part = hclust(X, cfg.linkage, cfg.K)
    pair = choose_pair(cfg.K, seed)
    record = TrialRecord(trial=trial, delta=delta, pair=pair, null_true=null_holds(labels, part, pair))

    scan_cfg = cfg.scan_config()
    try:
        D = build_decomposition(X, part, *pair)
        shared = None
        if cfg.K == 2 or any(m in SIGMA_MODE for m in cfg.methods):
            # S in phi-space does not depend on sigma; one scan serves every method
            shared = scan_truncation(D, X, part, "phi_space", scan_cfg, cfg.linkage, cfg.K)
    except ClusterInferenceError as e:
        log.warning("Trial %d (delta=%g) failed: %s", trial, delta, e)
        record.failures = {m: f"{type(e).__name__}: {e}" for m in cfg.methods}
        return record

    for method in cfg.methods:
        try:
            if method == "proposed" and cfg.K == 2:
                report = p_value_exact_k2(X, part, scan_cfg, truncation=pull_back_phi_set(shared, D),
                                          linkage=cfg.linkage)
            elif method == "proposed":
                is_cfg = ISConfig(n_draws=cfg.n_draws, seed=derive_seed(seed, 2))
                report = p_value_importance(X, part, pair, is_cfg, scan_cfg, linkage=cfg.linkage)
            else:
                sigma = resolve_sigma(SIGMA_MODE[method], X, part, cfg.sigma)
                report = p_value_gao(X, part, pair, sigma, scan_cfg, truncation=shared, linkage=cfg.linkage)
        except ClusterInferenceError as e:
            log.warning("Trial %d (delta=%g) %s failed: %s", trial, delta, method, e)
            record.failures[method] = f"{type(e).__name__}: {e}"
            continue
        record.pvalues[method] = report.p
        record.diagnostics[method] = {
            key: report.diagnostics[key]
            for key in ("alpha", "ess", "std_error", "tail_method", "sigma")
            if key in report.diagnostics
        }
    return record


def run_experiment(cfg: ExperimentConfig, n_jobs: int = 1) -> list[TrialRecord]:
    """All trials for every delta, ordered by (delta index, trial)."""
    records: list[TrialRecord] = []
    for d_idx, delta in enumerate(cfg.delta_grid):
        log.info("%s: delta=%g, %d trials", cfg.scenario, delta, cfg.trials)
        if n_jobs == 1:
            batch = []
            for t in range(cfg.trials):
                batch.append(run_trial(cfg, d_idx, t))
                if (t + 1) % 100 == 0:
                    log.info("  %d/%d trials", t + 1, cfg.trials)
        else:
            batch = Parallel(n_jobs=n_jobs)(delayed(run_trial)(cfg, d_idx, t) for t in range(cfg.trials))
        failed = sum(r.failed for r in batch)
        if failed:
            log.warning("%s: delta=%g had %d trial(s) with failures", cfg.scenario, delta, failed)
        records.extend(batch)
    return records


def records_for(records: list[TrialRecord], method: str, delta: Optional[float] = None) -> list[TrialRecord]:
    """Records that carry a p-value for ``method`` (optionally at one delta)."""
    return [
        r for r in records
        if method in r.pvalues and (delta is None or r.delta == delta)
    ]

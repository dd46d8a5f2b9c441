"""Command implementations behind ``main.py``.

Each command takes the parsed argparse namespace, prints one JSON document to
stdout and returns a process exit code: 0 on success, 2 for configuration
problems, 3 for statistical or numerical failures.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass
from typing import Any, Callable, Optional

import numpy as np

from config import DEFAULT_N_JOBS, DEFAULT_SEED, OUTPUT_DIR, VERSION
from experiments.simulation import run_experiment, scenario_config
from experiments.summaries import power_table, pvalue_table, uniformity_table
from inference.decomposition import build_decomposition, resolve_sigma, sigma_summary
from inference.distributions import li_transform_set
from inference.errors import ClusterInferenceError, ConfigError
from inference.hclust import ClusterPartition, hclust
from inference.pvalues import ISConfig, p_value_exact_k2, p_value_gao, p_value_importance
from inference.truncation import ScanConfig, observed_statistic, pull_back_phi_set, scan_truncation
from tools.datasets import DataMatrix, load_csv, standardize

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
GAO_MODES = {"gao-true": "true_sigma", "gao-all": "all", "gao-clustered": "clustered"}
TEST_METHODS = ("exact", "is") + tuple(GAO_MODES)


@dataclass
class RunManifest:
    """What produced an output: command, resolved configuration, seed, version, timing."""
    command: str
    config: dict[str, Any]
    seed: int
    version: str = VERSION
    duration_s: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def to_jsonable(obj):
    """Plain-JSON copy of obj: numpy scalars unwrapped, non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def emit(payload: dict) -> None:
    print(json.dumps(to_jsonable(payload), indent=2, allow_nan=False))


def _manifest(command: str, args, seed: int, started: float) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    return RunManifest(command, config, seed, duration_s=time.perf_counter() - started).to_dict()


def _seed(args) -> int:
    return DEFAULT_SEED if getattr(args, "seed", None) is None else int(args.seed)


def parse_pair(text: str, K: int) -> tuple[int, int]:
    """'k,k2' -> (k, k2), both in 1..K and distinct."""
    try:
        k, k_prime = (int(part) for part in str(text).split(","))
    except ValueError:
        raise ConfigError(f"--pair must look like 'k,k2', got {text!r}") from None
    if k == k_prime:
        raise ConfigError(f"--pair needs two different clusters, got {k},{k_prime}")
    if not (1 <= k <= K and 1 <= k_prime <= K):
        raise ConfigError(f"--pair {k},{k_prime} out of range for K={K}")
    return k, k_prime


def parse_columns(text: Optional[str]):
    if not text:
        return None
    return [c.strip() for c in text.split(",") if c.strip()]


def load_data(args) -> DataMatrix:
    X = load_csv(args.data, has_header=args.has_header, columns=parse_columns(args.columns))
    if args.standardize:
        X = standardize(X)
    return X


def _cluster(args, X: DataMatrix) -> ClusterPartition:
    part = hclust(X, args.linkage, args.k)
    log.info("Clustered n=%d points into K=%d (%s linkage), sizes %s",
             X.n, args.k, args.linkage, part.sizes().tolist())
    return part


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_test(args) -> int:
    """Selective test for one pair of estimated clusters."""
    started = time.perf_counter()
    seed = _seed(args)
    if args.method not in TEST_METHODS:
        raise ConfigError(f"Unknown method {args.method!r}; expected one of {TEST_METHODS}")
    if args.method == "gao-true" and args.sigma is None:
        raise ConfigError("--method gao-true requires --sigma")

    X = load_data(args)
    part = _cluster(args, X)
    pair = parse_pair(args.pair, args.k)
    scan_cfg = ScanConfig(grid_points=args.grid, refine_tol=args.tol)

    method = args.method
    if method == "exact" and args.k != 2:
        log.warning("The exact path needs K = 2 (got K = %d); using importance sampling", args.k)
        method = "is"

    if method == "exact":
        report = p_value_exact_k2(X, part, scan_cfg, tail_method=args.tail, linkage=args.linkage)
    elif method == "is":
        is_cfg = ISConfig(n_draws=args.n_draws, seed=seed)
        report = p_value_importance(X, part, pair, is_cfg, scan_cfg, linkage=args.linkage)
    else:
        sigma = resolve_sigma(GAO_MODES[method], X, part, args.sigma)
        report = p_value_gao(X, part, pair, sigma, scan_cfg, linkage=args.linkage)
        report.diagnostics["sigma_summary"] = sigma_summary(X, part)

    if method != args.method:
        report.diagnostics["fallback_from"] = args.method
    emit({
        "schema_version": SCHEMA_VERSION,
        **report.to_dict(),
        "cluster_sizes": part.sizes().tolist(),
        "manifest": _manifest("test", args, seed, started),
    })
    return 0


def cmd_simulate(args) -> int:
    """Run a named experiment and write pvalues.csv, power.csv, uniformity.csv, manifest.json."""
    started = time.perf_counter()
    seed = _seed(args)
    cfg = scenario_config(
        args.scenario,
        trials=args.trials,
        delta_grid=args.delta_grid,
        methods=args.methods,
        K=args.k,
        n_draws=args.n_draws,
        grid_points=args.grid,
        seed=seed,
    )
    n_jobs = args.n_jobs if args.n_jobs is not None else DEFAULT_N_JOBS
    records = run_experiment(cfg, n_jobs=n_jobs)

    out_dir = args.out or os.path.join(OUTPUT_DIR, cfg.scenario)
    os.makedirs(out_dir, exist_ok=True)
    tables = {
        "pvalues.csv": pvalue_table(records, cfg.methods),
        "power.csv": power_table(records, cfg.methods, cfg.alpha_level),
        "uniformity.csv": uniformity_table(records, cfg.methods, cfg.alpha_level),
    }
    written = []
    for name, frame in tables.items():
        path = os.path.join(out_dir, name)
        frame.to_csv(path, index=False, float_format="%.17g")
        written.append(path)
        log.info("Wrote %s (%d rows)", path, len(frame))

    manifest = _manifest("simulate", args, seed, started)
    manifest["config"] = cfg.to_dict()
    manifest["n_records"] = len(records)
    manifest["n_failed"] = sum(r.failed for r in records)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(manifest), f, indent=2)
    written.append(path)
    emit({"schema_version": SCHEMA_VERSION, "files": written, "manifest": manifest})
    return 0


def cmd_scan(args) -> int:
    """Print the truncation set for one pair together with the observed statistic."""
    started = time.perf_counter()
    X = load_data(args)
    part = _cluster(args, X)
    pair = parse_pair(args.pair, args.k)
    space = {"r": "r_space", "phi": "phi_space"}[args.space]
    if args.li and space != "r_space":
        raise ConfigError("--li applies to the r-space set only")

    D = build_decomposition(X, part, *pair)
    S = scan_truncation(D, X, part, space, ScanConfig(grid_points=args.grid, refine_tol=args.tol),
                        args.linkage, args.k)
    statistic = observed_statistic(D, space)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "space": space,
        "statistic": statistic,
        "pair": list(pair),
        "intervals": S.to_list(),
        "containing_interval": S.index_of(statistic),
    }
    if args.li:
        payload["li_intervals"] = li_transform_set(S, D.q, D.m).to_list()
    if space == "phi_space" and args.k == 2:
        payload["r_intervals"] = pull_back_phi_set(S, D).to_list()
    payload["manifest"] = _manifest("scan", args, _seed(args), started)
    emit(payload)
    return 0


COMMANDS: dict[str, Callable[[Any], int]] = {
    "test": cmd_test,
    "simulate": cmd_simulate,
    "scan": cmd_scan,
}


def run(args) -> int:
    """Dispatch to the command, turning library errors into an error document and exit code."""
    handler = COMMANDS.get(args.command)
    if handler is None:
        emit({"error": "ConfigError", "message": f"Unknown command {args.command!r}", "exit_code": 2})
        return 2
    try:
        return handler(args)
    except ClusterInferenceError as e:
        log.error("%s failed: %s", args.command, e)
        emit({"error": type(e).__name__, "message": str(e), "exit_code": e.exit_code})
        return e.exit_code
    except OSError as e:
        log.error("%s failed: %s", args.command, e)
        emit({"error": type(e).__name__, "message": str(e), "exit_code": 2})
        return 2

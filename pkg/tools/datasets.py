"""Data ingestion, standardization and synthetic data generation.

Everything stochastic goes through ``make_rng``: a numpy Generator backed by
the counter-based Philox bit generator, keyed by (seed, *keys) through a
SeedSequence. Normal and Student-t variates are produced by inverse-CDF
transforms of uniforms, so each call consumes a fixed number of uniforms and
outputs are stable for a given seed.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import special, stats

from config import DEGENERACY_RTOL
from inference.errors import (
    ConfigError,
    DataParseError,
    DegenerateDataError,
    DimensionError,
)

log = logging.getLogger(__name__)

MISSPECIFIED_KINDS = ("t5", "t10", "noniso")
NONISO_VARIANCES = (1.0, 2.0)

# ---------------------------------------------------------------------------
# Data structures
# ---------------------------------------------------------------------------


@dataclass
class DataMatrix:
    """An n x q observation matrix (rows are observations)."""
    values: np.ndarray
    column_names: Optional[list[str]] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DimensionError(f"Data must be a non-empty 2-D matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ConfigError("Data contains non-finite entries")
        self.values = values

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def q(self) -> int:
        return self.values.shape[1]


@dataclass
class MixtureSpec:
    """Gaussian mixture with fixed component sizes: rows ~ N(mean_g, sigma^2 I)."""
    means: list[np.ndarray]
    sizes: list[int]
    sigma: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        self.means = [np.atleast_1d(np.asarray(mu, dtype=float)) for mu in self.means]
        if not self.means:
            raise ConfigError("Mixture needs at least one component")
        if len(self.means) != len(self.sizes):
            raise ConfigError(
                f"{len(self.means)} means but {len(self.sizes)} sizes"
            )
        if any(int(s) < 1 for s in self.sizes):
            raise ConfigError(f"Component sizes must be positive: {self.sizes}")
        q = self.means[0].shape[0]
        if any(mu.shape != (q,) for mu in self.means):
            raise ConfigError("All component means must share one dimension")
        if self.sigma < 0 or self.delta < 0:
            raise ConfigError("sigma and delta must be nonnegative")
        self.sizes = [int(s) for s in self.sizes]

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def q(self) -> int:
        return self.means[0].shape[0]


@dataclass
class TrueLabels:
    """Generating component (1-based) of each row."""
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def n_components(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0


def as_values(X) -> np.ndarray:
    """Return the float matrix behind a DataMatrix or array-like."""
    if isinstance(X, DataMatrix):
        return X.values
    return DataMatrix(X).values


# ---------------------------------------------------------------------------
# Seeded randomness
# ---------------------------------------------------------------------------

def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Philox-backed generator for the stream identified by (seed, *keys)."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 63-bit child seed for (seed, *keys)."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def open_uniforms(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1)."""
    u = rng.random(size)
    return np.clip(u, np.ldexp(1.0, -54), 1.0 - np.ldexp(1.0, -53))


def standard_normals(rng: np.random.Generator, size) -> np.ndarray:
    return special.ndtri(open_uniforms(rng, size))


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def load_csv(
    path: str,
    has_header: bool = False,
    columns: Optional[Sequence[str | int]] = None,
) -> DataMatrix:
    """Read a numeric CSV (rows = observations, columns = features).

    Args:
        path: File path (UTF-8, comma separated, '.' decimal point).
        has_header: Skip (and keep as column names) the first row.
        columns: Optional subset of columns, by header name or 0-based index.

    Raises:
        DataParseError: ragged row or a cell that is not a finite number;
            ``row`` is the 0-based data row, ``column`` the 0-based column.
        DimensionError: fewer than 3 observations.
    """
    if not os.path.isfile(path):
        raise ConfigError(f"Data file not found: {path}")

    try:
        frame = pd.read_csv(
            path,
            header=0 if has_header else None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError as e:
        raise DimensionError(f"{path}: no data rows") from e
    except pd.errors.ParserError as e:
        raise DataParseError(f"{path}: ragged rows ({e})") from e

    ragged = frame.isna().any(axis=1).to_numpy()
    if ragged.any():
        row = int(np.argmax(ragged))
        raise DataParseError(f"{path}: row {row} has too few fields", row=row)

    if columns is not None:
        frame = _select_columns(frame, columns, has_header, path)

    numeric = frame.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    values = numeric.to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row, col = (int(i) for i in np.argwhere(bad)[0])
        raise DataParseError(
            f"{path}: non-numeric cell {frame.iat[row, col]!r} at row {row}, column {col}",
            row=row, column=col,
        )
    if values.shape[0] < 3:
        raise DimensionError(f"{path}: need at least 3 observations, got {values.shape[0]}")

    names = [str(c) for c in frame.columns] if has_header else None
    log.debug("Loaded %s: n=%d q=%d", path, values.shape[0], values.shape[1])
    return DataMatrix(values, column_names=names)


def _select_columns(frame: pd.DataFrame, columns, has_header: bool, path: str) -> pd.DataFrame:
    picked = []
    for c in columns:
        if isinstance(c, str) and not c.lstrip("-").isdigit():
            if not has_header or c not in frame.columns:
                raise ConfigError(f"{path}: unknown column {c!r}")
            picked.append(frame[c])
        else:
            idx = int(c)
            if not 0 <= idx < frame.shape[1]:
                raise ConfigError(f"{path}: column index {idx} out of range")
            picked.append(frame.iloc[:, idx])
    return pd.concat(picked, axis=1)


def write_csv(X, path: str, header: Optional[Sequence[str]] = None) -> str:
    """Write a data matrix so that ``load_csv`` reads it back exactly."""
    values = as_values(X)
    frame = pd.DataFrame(values, columns=list(header) if header else None)
    frame.to_csv(path, header=bool(header), index=False, float_format="%.17g")
    return path


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------

def standardize(X) -> DataMatrix:
    """Center each column and scale to unit sample standard deviation (ddof=1)."""
    values = as_values(X)
    if values.shape[0] < 2:
        raise DimensionError("Standardization needs at least 2 rows")
    mean = values.mean(axis=0)
    sd = values.std(axis=0, ddof=1)
    scale = np.maximum(np.abs(values).max(axis=0), 1.0)
    constant = sd <= DEGENERACY_RTOL * scale
    if constant.any():
        raise DegenerateDataError(
            f"Constant column(s) {np.flatnonzero(constant).tolist()} cannot be standardized"
        )
    names = X.column_names if isinstance(X, DataMatrix) else None
    return DataMatrix((values - mean) / sd, column_names=names)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def gen_mixture(spec: MixtureSpec, seed: int) -> tuple[DataMatrix, TrueLabels]:
    """Draw row i ~ N(mean of its component, sigma^2 I_q), components in order."""
    rng = make_rng(seed)
    means = np.repeat(np.vstack(spec.means), spec.sizes, axis=0)
    labels = np.repeat(np.arange(1, len(spec.sizes) + 1), spec.sizes)
    noise = standard_normals(rng, means.shape)
    return DataMatrix(means + spec.sigma * noise), TrueLabels(labels)


def gen_misspecified(kind: str, n: int, q: int, seed: int) -> DataMatrix:
    """Null data from a misspecified noise model.

    t5 / t10: i.i.d. Student-t entries; noniso: rows ~ N(0, diag(1, 2)) (q = 2).
    """
    if kind not in MISSPECIFIED_KINDS:
        raise ConfigError(f"Unknown misspecification kind {kind!r}; expected one of {MISSPECIFIED_KINDS}")
    rng = make_rng(seed)
    if kind == "noniso":
        if q != 2:
            raise ConfigError("The non-isotropic model is defined for q = 2")
        return DataMatrix(standard_normals(rng, (n, q)) * np.sqrt(NONISO_VARIANCES))
    df = 5 if kind == "t5" else 10
    return DataMatrix(stats.t.ppf(open_uniforms(rng, (n, q)), df))


def setting_spec(name: str, delta: float = 0.0, n: int = 30, sigma: float = 1.0, q: int = 2) -> MixtureSpec:
    """Mean geometry of the named simulation settings.

    null      one component at the origin (any q)
    setting1  (0,0) and (delta,0), n/2 points each
    setting2  equilateral triangle (0,0), (delta,0), (delta/2, delta*sqrt(3)/2)
    setting3  collinear (0,0), (delta,0), (2*delta,0)
    """
    if name == "null":
        return MixtureSpec([np.zeros(q)], [n], sigma=sigma, delta=0.0)
    if q != 2:
        raise ConfigError(f"{name} is defined for q = 2")
    if name == "setting1":
        half = n // 2
        return MixtureSpec([[0.0, 0.0], [delta, 0.0]], [half, n - half], sigma=sigma, delta=delta)
    third = n // 3
    sizes = [third, third, n - 2 * third]
    if name == "setting2":
        means = [[0.0, 0.0], [delta, 0.0], [delta / 2, delta * math.sqrt(3) / 2]]
    elif name == "setting3":
        means = [[0.0, 0.0], [delta, 0.0], [2 * delta, 0.0]]
    else:
        raise ConfigError(f"Unknown setting {name!r}")
    return MixtureSpec(means, sizes, sigma=sigma, delta=delta)

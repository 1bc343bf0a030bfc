# utils/data.py
from __future__ import annotations

import math
import pathlib
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from utils.errors import (
    DegenerateIndex,
    DegenerateOutcome,
    DimensionMismatch,
    InvalidConfig,
    MissingColumn,
    NonBinaryOutcome,
    NonFiniteValue,
)


# ----- dataset --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Dataset:
    """Validated binary-outcome sample. Row i of `x` belongs to `y[i]`."""

    y: np.ndarray
    x: np.ndarray
    columns: Tuple[str, ...]

    def __post_init__(self):
        y = np.array(self.y, dtype=float).ravel()
        x = np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        if len(self.columns) != x.shape[1]:
            raise InvalidConfig(f"{len(self.columns)} column names for {x.shape[1]} predictors")
        if y.shape[0] < 2:
            raise DegenerateOutcome("need at least 2 rows")
        if not np.all((y == 0.0) | (y == 1.0)):
            bad = y[~((y == 0.0) | (y == 1.0))][0]
            raise NonBinaryOutcome(f"outcome must be 0/1, found {bad!r}")
        if not np.all(np.isfinite(x)):
            raise NonFiniteValue("predictors contain NaN or Inf")
        n1 = int(y.sum())
        if n1 == 0 or n1 == y.shape[0]:
            raise DegenerateOutcome(f"need both outcome classes, got n1={n1}, n0={y.shape[0] - n1}")
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def n1(self) -> int:
        return int(self.y.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def pi_hat(self) -> float:
        return self.n1 / self.n

    @property
    def positives(self) -> np.ndarray:
        return np.flatnonzero(self.y == 1.0)

    @property
    def negatives(self) -> np.ndarray:
        return np.flatnonzero(self.y == 0.0)

    def predictors(self, columns: Optional[Sequence[str]] = None) -> np.ndarray:
        if columns is None:
            return self.x
        missing = [c for c in columns if c not in self.columns]
        if missing:
            raise MissingColumn(f"unknown predictor column(s): {', '.join(missing)}")
        idx = [self.columns.index(c) for c in columns]
        return self.x[:, idx]

    def design(self, columns: Optional[Sequence[str]] = None) -> np.ndarray:
        """X̃ = (1, X')' with the intercept first."""
        xs = self.predictors(columns)
        return np.column_stack([np.ones(self.n), xs])


def load_dataset(rows, outcome_column: str) -> Dataset:
    """Build a Dataset from tabular records (DataFrame, list of dicts, dict of lists)."""
    df = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(rows)
    if outcome_column not in df.columns:
        raise MissingColumn(f"outcome column '{outcome_column}' not found")
    if len(df) < 2:
        raise DegenerateOutcome("need at least 2 rows")

    y = pd.to_numeric(df[outcome_column], errors="coerce")
    if y.isna().any():
        raise NonBinaryOutcome(f"outcome column '{outcome_column}' has missing or non-numeric values")

    predictors = [c for c in df.columns if c != outcome_column]
    x = df[predictors].apply(pd.to_numeric, errors="coerce")
    if x.isna().any().any():
        bad = x.columns[x.isna().any()].tolist()
        raise NonFiniteValue(f"missing or non-numeric predictor values in: {', '.join(map(str, bad))}")

    return Dataset(y=y.to_numpy(dtype=float), x=x.to_numpy(dtype=float),
                   columns=tuple(str(c) for c in predictors))


def read_csv(path: str | pathlib.Path, outcome_column: str) -> Dataset:
    return load_dataset(pd.read_csv(path), outcome_column)


# ----- index values ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class IndexValues:
    """G(X_i, β) for every observation, with the β it was evaluated at."""

    g: np.ndarray
    beta: Optional[np.ndarray] = None

    def __post_init__(self):
        g = np.array(self.g, dtype=float).ravel()
        if not np.all(np.isfinite(g)):
            raise NonFiniteValue("index values must be finite")
        if g.shape[0] < 2 or np.var(g) <= 0.0:
            raise DegenerateIndex("index has zero sample variance")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    def __len__(self):
        return self.g.shape[0]


def as_index_array(g, data: Dataset) -> np.ndarray:
    """Accept IndexValues or a raw array; raw arrays skip the variance check."""
    arr = g.g if isinstance(g, IndexValues) else np.asarray(g, dtype=float).ravel()
    if arr.shape[0] != data.n:
        raise DimensionMismatch(f"index has length {arr.shape[0]}, dataset has n={data.n}")
    return arr


# ----- t grid ---------------------------------------------------------------

@dataclass(frozen=True)
class GridConfig:
    tau_l: float = 0.05
    tau_u: float = 0.95
    step: float = 0.01
    epsilon: float = 0.01
    alpha: float = 0.10

    def __post_init__(self):
        if not (0.0 <= self.tau_l < self.tau_u <= 1.0):
            raise InvalidConfig(f"need 0 <= tau_l < tau_u <= 1, got ({self.tau_l}, {self.tau_u})")
        if not self.step > 0:
            raise InvalidConfig("grid step must be positive")
        if not self.epsilon > 0:
            raise InvalidConfig("epsilon must be positive")
        if not (0.0 < self.alpha < 1.0):
            raise InvalidConfig("alpha must lie in (0, 1)")

    @property
    def full_range(self) -> bool:
        return self.tau_l == 0.0 and self.tau_u == 1.0

    @classmethod
    def from_dict(cls, d: dict) -> "GridConfig":
        keys = ("tau_l", "tau_u", "step", "epsilon", "alpha")
        return cls(**{k: float(d[k]) for k in keys if k in d and d[k] is not None})


def make_t_grid(cfg: GridConfig) -> np.ndarray:
    span = cfg.tau_u - cfg.tau_l
    k = math.floor(span / cfg.step + 1e-9)
    pts = np.round(cfg.tau_l + cfg.step * np.arange(k + 1), 12)
    pts = pts[pts <= cfg.tau_u]
    if cfg.tau_u - pts[-1] > 1e-12:
        pts = np.append(pts, cfg.tau_u)
    else:
        pts[-1] = cfg.tau_u
    return pts

# utils/resample.py
from __future__ import annotations

import importlib
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from tenacity import Retrying, before_sleep_log, retry_if_exception_type, stop_after_attempt

from utils.data import Dataset
from utils.errors import (
    DimensionMismatch,
    ExcessiveFailures,
    FitFailure,
    InvalidConfig,
    InvalidWeights,
    SingularAMatrix,
)
from utils.logit import WEIGHT_LAWS, FittedModel, draw_weights, fit_logit, fit_logit_weighted
from utils.pool import run_replicates
from utils.roc import weighted_curve, weighted_tp_fp

log = logging.getLogger(__name__)

SCHEMES = ("weighted", "multiplier")
VARIANCE_SOURCES = ("auto", "analytic", "bootstrap")
MAX_FAILURE_SHARE = 0.05
MIN_BOOT = 100
REDRAWS = 3

# a weighted refit can fail outright or leave a singular A; both get fresh weights
REFIT_FAILURES = (FitFailure, SingularAMatrix)


@dataclass(frozen=True)
class BootstrapConfig:
    scheme: str = "multiplier"
    weight_law: str = "two_point"
    variance: str = "auto"
    boot: int = 1000
    seed: int = 20240101

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidConfig(f"unknown scheme '{self.scheme}' (choose from {', '.join(SCHEMES)})")
        if self.weight_law == "gaussian":
            raise InvalidWeights("gaussian weights go negative; use the multiplier scheme for normal draws")
        if self.weight_law not in WEIGHT_LAWS:
            raise InvalidConfig(f"unknown weight law '{self.weight_law}'")
        if self.variance not in VARIANCE_SOURCES:
            raise InvalidConfig(f"unknown variance source '{self.variance}'")
        if int(self.boot) < 1:
            raise InvalidConfig("boot must be positive")
        object.__setattr__(self, "boot", int(self.boot))
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def from_dict(cls, d: dict) -> "BootstrapConfig":
        keys = ("scheme", "weight_law", "variance", "boot", "seed")
        return cls(**{k: d[k] for k in keys if d.get(k) is not None})

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "weight_law": self.weight_law,
                "variance": self.variance, "boot": self.boot, "seed": self.seed}

    def uses_bootstrap_variance(self) -> bool:
        if self.variance == "auto":
            return self.scheme == "weighted"
        return self.variance == "bootstrap"


@dataclass(frozen=True, eq=False)
class BootstrapDraws:
    scheme: str
    t_grid: np.ndarray
    draws: np.ndarray          # B × m, already √n-scaled
    B: int
    seed: int
    failures: int = 0
    failure_messages: Tuple[str, ...] = ()
    centered: bool = True

    def variance(self) -> np.ndarray:
        """Per-t draw variance, the bootstrap σ̂²_t."""
        return np.mean((self.draws - self.draws.mean(axis=0)) ** 2, axis=0)

    def diagnostics(self) -> dict:
        return {"scheme": self.scheme, "B": self.B, "seed": self.seed,
                "failures": self.failures, "centered": self.centered}


@dataclass(frozen=True, eq=False)
class ResampleProblem:
    """Everything a scheme needs to produce one replicate of the contrast process.

    The simulated process is Σ_k contrast[k] · Ψ̂_k(t) over the listed models;
    contrast (1,) gives a single curve, (-1, 1) the difference model2 - model1.
    """

    data: Dataset
    models: Tuple[FittedModel, ...]
    contrast: np.ndarray
    t_grid: np.ndarray
    seed: int
    weight_law: str = "two_point"
    base_curves: Optional[np.ndarray] = None    # K × m, R̂_k on the grid
    psi: Optional[np.ndarray] = None            # n × m, Σ_k contrast[k] ψ̂_R,k

    def rng(self, r: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, r])


# ----- replicate helpers --------------------------------------------------

def with_redraws(attempt_fn):
    """Run attempt_fn, redrawing up to REDRAWS more times on a first-stage failure."""
    for attempt in Retrying(stop=stop_after_attempt(REDRAWS + 1),
                            retry=retry_if_exception_type(REFIT_FAILURES),
                            before_sleep=before_sleep_log(log, logging.DEBUG),
                            reraise=True):
        with attempt:
            result = attempt_fn()
    return result


# ----- scheme loader --------------------------------------------------------

def load_scheme(name: str):
    try:
        mod = importlib.import_module(f"schemes.{name}")
    except ModuleNotFoundError:
        raise InvalidConfig(f"unknown resampling scheme '{name}'")
    fn = getattr(mod, "replicate", None)
    if not fn:
        raise InvalidConfig(f"schemes/{name}.py missing replicate()")
    return fn


def _collect(scheme: str, problem: ResampleProblem, B: int, workers: int,
             progress: bool) -> BootstrapDraws:
    fn = load_scheme(scheme)
    results = run_replicates(lambda r: fn(problem, r), B, workers=workers,
                             progress=progress, desc=f"{scheme} bootstrap", capture=REFIT_FAILURES)
    rows = [row for _, row, err in results if err is None]
    errors = tuple(err for _, _, err in results if err is not None)
    if errors:
        log.warning("%d of %d replicates failed to refit", len(errors), B)
    if len(errors) > MAX_FAILURE_SHARE * B:
        raise ExcessiveFailures(f"{len(errors)} of {B} replicates failed (limit {MAX_FAILURE_SHARE:.0%})")

    draws = np.vstack(rows) if rows else np.empty((0, problem.t_grid.shape[0]))
    return BootstrapDraws(scheme=scheme, t_grid=problem.t_grid, draws=draws, B=B,
                          seed=problem.seed, failures=len(errors),
                          failure_messages=errors, centered=check_centering(draws))


def _contrast(models: Sequence[FittedModel], contrast) -> np.ndarray:
    c = np.ones(len(models)) if contrast is None else np.asarray(contrast, dtype=float)
    if c.shape[0] != len(models):
        raise DimensionMismatch(f"{c.shape[0]} contrast weights for {len(models)} models")
    return c


# ----- the two schemes ------------------------------------------------------

def weighted_bootstrap(data: Dataset, grid, cfg: BootstrapConfig, B: int, seed: int,
                       models: Optional[Sequence[FittedModel]] = None, contrast=None,
                       workers: int = 1, progress: bool = False) -> BootstrapDraws:
    """Refit every model under shared weights and store √n(R̂^w - R̂) per replicate."""
    if B < MIN_BOOT:
        raise InvalidConfig(f"weighted bootstrap needs B >= {MIN_BOOT}, got {B}")
    models = tuple(models) if models is not None else (fit_logit(data),)
    t = np.asarray(grid, dtype=float)
    base = np.vstack([weighted_curve(m.to_index(m.probabilities(data)), data.y, None, t)[0]
                      for m in models])
    problem = ResampleProblem(data=data, models=models, contrast=_contrast(models, contrast),
                              t_grid=t, seed=seed, weight_law=cfg.weight_law, base_curves=base)
    return _collect("weighted", problem, B, workers, progress)


def multiplier_bootstrap(psi_r, B: int, seed: int, t_grid=None,
                         workers: int = 1, progress: bool = False) -> BootstrapDraws:
    """Draw b is (1/√n) Σ_i U_i ψ̂_R(i, ·) with U_i ~ N(0, 1); nothing is refitted."""
    psi = getattr(psi_r, "psi_r", psi_r)
    psi = np.asarray(psi, dtype=float)
    if psi.ndim != 2:
        raise DimensionMismatch("influence matrix must be n × m")
    t = getattr(psi_r, "t_grid", None) if t_grid is None else np.asarray(t_grid, dtype=float)
    if t is None:
        t = np.arange(psi.shape[1], dtype=float)
    if t.shape[0] != psi.shape[1]:
        raise DimensionMismatch(f"{t.shape[0]} grid points for {psi.shape[1]} influence columns")
    problem = ResampleProblem(data=None, models=(), contrast=np.ones(0), t_grid=t,
                              seed=seed, psi=psi)
    return _collect("multiplier", problem, B, workers, progress)


# ----- pointwise covariance -------------------------------------------------

def _pointwise_replicate(data, model, cutoffs, law, seed, fixed_index):
    def attempt(rng):
        w = draw_weights(rng, data.n, law)
        w.check_classes(data)
        if fixed_index:
            lam = model.probabilities(data)
        else:
            lam = fit_logit_weighted(data, w, model.columns).probabilities(data)
        tp, fp = weighted_tp_fp(lam, data.y, w.w, cutoffs)
        return np.column_stack([tp, fp])

    def one(r):
        rng = np.random.default_rng([seed, r])
        return with_redraws(lambda: attempt(rng))
    return one


def pointwise_bootstrap_cov(data: Dataset, c, cfg: BootstrapConfig, B: int, seed: int,
                            model: Optional[FittedModel] = None, fixed_index: bool = False,
                            workers: int = 1) -> np.ndarray:
    """Ψ̂_W(c) = (n/B) Σ (R̂^w - mean)(R̂^w - mean)' over stacked (TP̂^w, FP̂^w).

    `c` is on the probability scale; a vector of cutoffs returns one 2×2 block each.
    fixed_index keeps the index at β̂ and only reweights the counts.
    """
    if B < MIN_BOOT:
        raise InvalidConfig(f"weighted bootstrap needs B >= {MIN_BOOT}, got {B}")
    model = model or fit_logit(data)
    cutoffs = np.atleast_1d(np.asarray(c, dtype=float))
    fn = _pointwise_replicate(data, model, cutoffs, cfg.weight_law, seed, fixed_index)
    results = run_replicates(fn, B, workers=workers, capture=REFIT_FAILURES)
    reps = [row for _, row, err in results if err is None]
    failures = B - len(reps)
    if failures > MAX_FAILURE_SHARE * B:
        raise ExcessiveFailures(f"{failures} of {B} replicates failed (limit {MAX_FAILURE_SHARE:.0%})")

    stack = np.stack(reps)                         # B' × m × 2
    dev = stack - stack.mean(axis=0)
    cov = data.n * np.einsum("bmi,bmj->mij", dev, dev) / stack.shape[0]
    return cov[0] if np.ndim(c) == 0 else cov


# ----- sup statistics -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SupStatistics:
    sups: np.ndarray
    mode: str

    def critical_value(self, alpha: float) -> float:
        """Order statistic M_(⌊(1-α)B⌋), 1-based."""
        s = np.sort(self.sups)
        k = math.floor((1.0 - alpha) * s.shape[0] + 1e-9)
        return float(s[max(k, 1) - 1])


def sup_statistics(draws, scale, mode: str = "two_sided") -> SupStatistics:
    mat = np.asarray(getattr(draws, "draws", draws), dtype=float)
    sc = np.asarray(scale, dtype=float)
    if np.any(sc <= 0):
        raise InvalidConfig("scale must be strictly positive")
    if sc.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"{sc.shape[0]} scale values for {mat.shape[1]} grid points")
    z = mat / sc[None, :]
    if mode == "one_sided":
        return SupStatistics(sups=z.max(axis=1), mode=mode)
    if mode == "two_sided":
        return SupStatistics(sups=np.abs(z).max(axis=1), mode=mode)
    raise InvalidConfig(f"unknown mode '{mode}' (one_sided | two_sided)")


def check_centering(draws: np.ndarray) -> bool:
    """|column mean| <= 3 σ/√B at every grid point."""
    B = draws.shape[0]
    if B < 2:
        return True
    mean = draws.mean(axis=0)
    sd = draws.std(axis=0)
    ok = bool(np.all(np.abs(mean) <= 3.0 * sd / math.sqrt(B) + 1e-12))
    if not ok:
        worst = int(np.argmax(np.abs(mean) / np.maximum(sd, 1e-300)))
        log.warning("bootstrap draws are not centered (worst grid point %d)", worst)
    return ok

# utils/logit.py
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
from scipy.special import expit

from utils.data import Dataset, IndexValues
from utils.errors import (
    AllZeroClassWeight,
    DimensionMismatch,
    InvalidConfig,
    InvalidWeights,
    NoConvergence,
    RankDeficient,
    Separation,
    SingularAMatrix,
)

log = logging.getLogger(__name__)

MAX_ITER = 100
GRAD_TOL = 1e-8
OBJ_TOL = 1e-12
BETA_BOUND = 30.0
SATURATION = 1e-10

# strictly increasing maps applied to Λ(X̃'β) before ranking
TRANSFORMS = {
    "identity": lambda v: v,
    "exp": np.exp,
    "cube": lambda v: v ** 3,
}

WEIGHT_LAWS = ("two_point", "exponential")


# ----- types ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FittedModel:
    beta_hat: np.ndarray
    loglik: float
    psi_beta: np.ndarray
    a_matrix: np.ndarray
    v_hat: np.ndarray
    converged: bool
    iterations: int
    columns: Tuple[str, ...]
    link: str = "logit"
    transform: str = "identity"

    def probabilities(self, data: Dataset) -> np.ndarray:
        return expit(data.design(self.columns) @ self.beta_hat)

    def index(self, data: Dataset) -> IndexValues:
        return IndexValues(g=self.to_index(self.probabilities(data)), beta=self.beta_hat)

    def to_index(self, p):
        """Map probability-scale values (or cutoffs) onto the ranking index."""
        return TRANSFORMS[self.transform](p)

    def with_transform(self, name: str) -> "FittedModel":
        if name not in TRANSFORMS:
            raise InvalidConfig(f"unknown index transform '{name}' (choose from {', '.join(TRANSFORMS)})")
        return replace(self, transform=name)

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "coefficients": dict(zip(["intercept", *self.columns], self.beta_hat.tolist())),
            "link": self.link,
            "transform": self.transform,
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
        }


@dataclass(frozen=True, eq=False)
class WeightVector:
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidWeights("weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def check_classes(self, data: Dataset):
        if self.w.shape[0] != data.n:
            raise DimensionMismatch(f"{self.w.shape[0]} weights for n={data.n}")
        if not np.any(self.w[data.positives] > 0) or not np.any(self.w[data.negatives] > 0):
            raise AllZeroClassWeight("an outcome class carries zero total weight")


def draw_weights(rng: np.random.Generator, n: int, law: str = "two_point") -> WeightVector:
    """Bootstrap weights with E W = 1 and Var W = 1."""
    if law == "two_point":
        return WeightVector(2.0 * rng.integers(0, 2, size=n))
    if law == "exponential":
        return WeightVector(rng.exponential(1.0, size=n))
    if law == "gaussian":
        raise InvalidWeights("gaussian weights go negative; use the multiplier scheme for normal draws")
    raise InvalidConfig(f"unknown weight law '{law}' (choose from {', '.join(WEIGHT_LAWS)})")


# ----- fitting --------------------------------------------------------------

def _loglik(X, y, w, beta) -> float:
    eta = X @ beta
    return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))


def _newton(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, float, int]:
    # damped Newton on the (weighted) Bernoulli log-likelihood
    k = X.shape[1]
    beta = np.zeros(k)
    ll = _loglik(X, y, w, beta)
    change = np.inf
    active = w > 0

    for it in range(1, MAX_ITER + 1):
        p = expit(X @ beta)
        score = X.T @ (w * (y - p))
        if np.max(np.abs(score)) < GRAD_TOL and change <= OBJ_TOL:
            return beta, ll, it

        hess = (X * (w * p * (1.0 - p))[:, None]).T @ X
        try:
            step = sla.solve(hess, score, assume_a="pos")
        except (sla.LinAlgError, ValueError):
            if np.all((p[active] < SATURATION) | (p[active] > 1.0 - SATURATION)):
                raise Separation("fitted probabilities saturate; outcome is perfectly separated")
            raise RankDeficient("information matrix is singular")

        t = 1.0
        while True:
            cand = beta + t * step
            ll_new = _loglik(X, y, w, cand)
            if ll_new >= ll - 1e-12 * abs(ll) or t < 2.0 ** -30:
                break
            t *= 0.5

        change = abs(ll_new - ll) / max(1.0, abs(ll))
        beta, ll = cand, ll_new

        if np.max(np.abs(beta)) > BETA_BOUND:
            raise Separation(f"|beta| exceeded {BETA_BOUND:g} after {it} iterations")
        p = expit(X @ beta)
        if np.all((p[active] < SATURATION) | (p[active] > 1.0 - SATURATION)):
            raise Separation("fitted probabilities saturate; outcome is perfectly separated")

    raise NoConvergence(f"no convergence after {MAX_ITER} iterations")


def _fit(data: Dataset, w: np.ndarray, columns: Optional[Sequence[str]]) -> FittedModel:
    cols = tuple(data.columns if columns is None else columns)
    X = data.design(cols)
    if np.linalg.matrix_rank(X[w > 0]) < X.shape[1]:
        raise RankDeficient(f"design with intercept and {len(cols)} predictor(s) lacks full column rank")

    beta, ll, iters = _newton(X, data.y, w)
    log.debug("converged in %d iterations, loglik %.6f", iters, ll)
    a_matrix, psi = _influence(X, data.y, w, beta)
    return FittedModel(
        beta_hat=beta,
        loglik=ll,
        psi_beta=psi,
        a_matrix=a_matrix,
        v_hat=psi.T @ psi / data.n,
        converged=True,
        iterations=iters,
        columns=cols,
    )


def fit_logit(data: Dataset, columns: Optional[Sequence[str]] = None) -> FittedModel:
    """Logit MLE of Y on (1, X). `columns` picks a predictor subset."""
    return _fit(data, np.ones(data.n), columns)


def fit_logit_weighted(data: Dataset, w: WeightVector,
                       columns: Optional[Sequence[str]] = None) -> FittedModel:
    """Maximizes Σ W_i q(Y_i, X_i, β); all-ones weights reproduce fit_logit."""
    w.check_classes(data)
    return _fit(data, w.w, columns)


# ----- influence ------------------------------------------------------------

def _influence(X, y, w, beta) -> Tuple[np.ndarray, np.ndarray]:
    n = X.shape[0]
    p = expit(X @ beta)
    a_matrix = (X * (w * p * (1.0 - p))[:, None]).T @ X / n
    try:
        factor = sla.cho_factor(a_matrix)
    except sla.LinAlgError:
        raise SingularAMatrix("estimated A matrix is not positive definite")
    # row i: A^{-1} X̃_i (Y_i - Λ(X̃_i'β))
    psi = sla.cho_solve(factor, (X * (y - p)[:, None]).T).T
    return a_matrix, psi


def influence_rows(model: FittedModel, data: Dataset) -> np.ndarray:
    _, psi = _influence(data.design(model.columns), data.y, np.ones(data.n), model.beta_hat)
    return psi

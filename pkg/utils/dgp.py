# utils/dgp.py
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from utils.data import Dataset
from utils.errors import InvalidConfig
from utils.roc import weighted_auc, weighted_curve

PREDICTOR_LAWS = ("normal01", "uniform")
LINKS = {
    "logit": expit,
    "cauchit": lambda v: 0.5 + np.arctan(v) / np.pi,
}
UNIFORM_RANGE = (-0.5, 1.5)

Seed = Union[int, Sequence[int]]


@dataclass(frozen=True)
class DgpSpec:
    n: int = 500
    beta_true: Tuple[float, ...] = (0.0, 0.5, 0.25, 1.0)
    predictor_law: str = "normal01"
    link: str = "logit"
    noise: int = 0              # extra N(0,1) columns unrelated to Y

    def __post_init__(self):
        object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))
        if int(self.n) < 50:
            raise InvalidConfig(f"n must be at least 50, got {self.n}")
        if len(self.beta_true) < 2:
            raise InvalidConfig("beta_true needs an intercept and at least one slope")
        if self.predictor_law not in PREDICTOR_LAWS:
            raise InvalidConfig(f"unknown predictor law '{self.predictor_law}'")
        if self.link not in LINKS:
            raise InvalidConfig(f"unknown link '{self.link}' (logit | cauchit)")
        if int(self.noise) < 0:
            raise InvalidConfig("noise must be >= 0")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "noise", int(self.noise))

    @classmethod
    def from_dict(cls, d: dict) -> "DgpSpec":
        keys = ("n", "beta_true", "predictor_law", "link", "noise")
        return cls(**{k: d[k] for k in keys if d.get(k) is not None})

    def to_dict(self) -> dict:
        return {"n": self.n, "beta_true": list(self.beta_true), "predictor_law": self.predictor_law,
                "link": self.link, "noise": self.noise}

    @property
    def k(self) -> int:
        return len(self.beta_true) - 1

    @property
    def signal_columns(self) -> Tuple[str, ...]:
        return tuple(f"x{j}" for j in range(1, self.k + 1))

    @property
    def noise_columns(self) -> Tuple[str, ...]:
        return tuple(f"z{j}" for j in range(1, self.noise + 1))

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        """p(X) = G(X̃'β°) from the signal columns of x."""
        eta = self.beta_true[0] + x[:, : self.k] @ np.asarray(self.beta_true[1:])
        return LINKS[self.link](eta)


def _predictors(spec: DgpSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    if spec.predictor_law == "normal01":
        x = rng.standard_normal((n, spec.k))
    else:
        x = rng.uniform(*UNIFORM_RANGE, size=(n, spec.k))
    if spec.noise:
        x = np.column_stack([x, rng.standard_normal((n, spec.noise))])
    return x


def draw_sample(spec: DgpSpec, seed: Seed) -> Dataset:
    rng = np.random.default_rng(seed)
    x = _predictors(spec, rng, spec.n)
    y = (rng.uniform(size=spec.n) < spec.probabilities(x)).astype(float)
    return Dataset(y=y, x=x, columns=spec.signal_columns + spec.noise_columns)


@dataclass(frozen=True, eq=False)
class TrueValues:
    cutoffs: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    t_grid: np.ndarray
    r: np.ndarray
    auc: float
    pi: float

    @property
    def tp_minus_fp(self) -> np.ndarray:
        return self.tp - self.fp

    def target(self, name: str) -> np.ndarray:
        return {"tp": self.tp, "fp": self.fp, "tp_minus_fp": self.tp_minus_fp}[name]


def true_values(spec: DgpSpec, cutoffs: Sequence[float], mc_n: int = 1_000_000,
                t_grid: Sequence[float] = (), seed: Seed = 0) -> TrueValues:
    """Population TP, FP, R(t) and AUC of the index p(X) at β°.

    Each simulated X enters the Y=1 class with weight p(X) and the Y=0 class
    with weight 1-p(X), which removes the Bernoulli noise from the truth.
    """
    rng = np.random.default_rng(seed)
    x = _predictors(replace(spec, noise=0), rng, mc_n)
    p = spec.probabilities(x)

    g = np.concatenate([p, p])
    y = np.concatenate([np.ones(mc_n), np.zeros(mc_n)])
    w = np.concatenate([p, 1.0 - p])

    c = np.asarray(cutoffs, dtype=float)
    above = p[:, None] > c[None, :]
    tp = (p @ above) / p.sum()
    fp = ((1.0 - p) @ above) / (1.0 - p).sum()

    t = np.asarray(t_grid, dtype=float)
    r = weighted_curve(g, y, w, t)[0] if t.size else np.empty(0)
    return TrueValues(cutoffs=c, tp=tp, fp=fp, t_grid=t, r=r,
                      auc=weighted_auc(g, y, w), pi=float(p.mean()))

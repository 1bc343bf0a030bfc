# utils/kernels.py
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import iqr

from utils.data import Dataset, as_index_array
from utils.errors import BandwidthDegenerate, InvalidConfig, TooFewPerClass
from utils.logit import FittedModel

log = logging.getLogger(__name__)

MIN_PER_CLASS = 10
RATIO_FLOOR = 1e-12
MASS_POINTS = 513


def _biweight(u):
    return np.where(np.abs(u) <= 1.0, (15.0 / 16.0) * (1.0 - u * u) ** 2, 0.0)


def _epanechnikov(u):
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _triangular(u):
    return np.where(np.abs(u) <= 1.0, 1.0 - np.abs(u), 0.0)


KERNELS = {
    "biweight": _biweight,
    "epanechnikov": _epanechnikov,
    "triangular": _triangular,
}

GRADIENTS = ("one_step", "plug_in", "full_sample")


@dataclass(frozen=True)
class KernelConfig:
    kernel: str = "biweight"
    bandwidth: Union[str, float] = "silverman"   # "silverman" or a fixed h
    delta: Union[str, float] = "inv_log_n"       # "inv_log_n" or a fixed δ
    gradient: str = "one_step"

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise InvalidConfig(f"unknown kernel '{self.kernel}' (choose from {', '.join(KERNELS)})")
        if self.kernel == "epanechnikov":
            log.warning("epanechnikov kernel is not continuously differentiable at ±1")
        if self.gradient not in GRADIENTS:
            raise InvalidConfig(f"unknown gradient estimator '{self.gradient}'")
        if self.bandwidth != "silverman":
            h = _as_float(self.bandwidth, "bandwidth")
            if not h > 0:
                raise BandwidthDegenerate(f"fixed bandwidth must be positive, got {h}")
            object.__setattr__(self, "bandwidth", h)
        if self.delta != "inv_log_n":
            d = _as_float(self.delta, "delta")
            if not d > 0:
                raise InvalidConfig(f"delta must be positive, got {d}")
            object.__setattr__(self, "delta", d)

    @classmethod
    def from_dict(cls, d: dict) -> "KernelConfig":
        keys = ("kernel", "bandwidth", "delta", "gradient")
        return cls(**{k: d[k] for k in keys if d.get(k) is not None})

    def to_dict(self) -> dict:
        return {"kernel": self.kernel, "bandwidth": self.bandwidth,
                "delta": self.delta, "gradient": self.gradient}


def _as_float(v, name) -> float:
    try:
        return float(v)
    except (TypeError, ValueError):
        raise InvalidConfig(f"{name} must be a number or its named rule, got {v!r}")


@dataclass(frozen=True, eq=False)
class DensityPair:
    eval_points: np.ndarray
    f1: np.ndarray
    f0: np.ndarray
    ratio: np.ndarray
    a0: float
    b0: float
    h1: float
    h0: float
    delta: float
    mass1: float = 1.0     # trapezoid mass of the clamped primary estimate over [a0, b0]
    mass0: float = 1.0


# ----- bandwidths -----------------------------------------------------------

def silverman_bandwidth(values) -> float:
    """1.06 · min(sd, IQR/1.349) · m^(-1/5)."""
    v = np.asarray(values, dtype=float).ravel()
    m = v.shape[0]
    if m < 2:
        raise BandwidthDegenerate("need at least 2 values for a bandwidth")
    sd = float(np.std(v, ddof=1))
    if sd <= 0.0:
        raise BandwidthDegenerate("index values are all identical")
    spread = iqr(v) / 1.349
    scale = min(sd, spread) if spread > 0 else sd
    return 1.06 * scale * m ** -0.2


def _check_classes(data: Dataset):
    if data.n1 < MIN_PER_CLASS or data.n0 < MIN_PER_CLASS:
        raise TooFewPerClass(
            f"kernel estimation needs at least {MIN_PER_CLASS} per class, got n1={data.n1}, n0={data.n0}")


def _class_bandwidths(data: Dataset, v: np.ndarray, cfg: KernelConfig) -> Tuple[float, float]:
    if cfg.bandwidth != "silverman":
        return cfg.bandwidth, cfg.bandwidth
    return (silverman_bandwidth(v[data.positives]),
            silverman_bandwidth(v[data.negatives]))


def _support(data: Dataset, v: np.ndarray) -> Tuple[float, float]:
    g0 = v[data.negatives]
    a0, b0 = float(g0.min()), float(g0.max())
    if b0 <= a0:
        raise BandwidthDegenerate("Y=0 index values have no spread")
    return a0, b0


def _delta(data: Dataset, cfg: KernelConfig, a0: float, b0: float) -> float:
    d = 1.0 / math.log(data.n) if cfg.delta == "inv_log_n" else cfg.delta
    return min(d, 0.5 * (b0 - a0))


def _clamp(c, lo, hi):
    if lo > hi:
        lo = hi = 0.5 * (lo + hi)
    return np.clip(c, lo, hi)


def _kernel_matrix(v, c, h, kernel):
    # rows: observations, columns: evaluation points
    return KERNELS[kernel]((v[:, None] - c[None, :]) / h)


# ----- densities ------------------------------------------------------------

def _primary_density(v_class, c, h, kernel) -> np.ndarray:
    return _kernel_matrix(v_class, c, h, kernel).sum(axis=0) / (v_class.shape[0] * h)


def _clamped_mass(v_class, h, kernel, a0, b0, delta) -> float:
    grid = np.unique(np.r_[np.linspace(a0, b0, MASS_POINTS), a0 + delta, b0 - delta])
    dens = _primary_density(v_class, _clamp(grid, a0 + delta, b0 - delta), h, kernel)
    mass = float(trapezoid(dens, grid))
    if not mass > 0:
        raise BandwidthDegenerate("kernel density has no mass on the Y=0 support")
    return mass


def density_estimates(data: Dataset, g, cfg: KernelConfig, eval_points) -> DensityPair:
    """Class-conditional kernel densities, frozen at a0+δ and b0-δ near the edges.

    The frozen strips overstate mass wherever the density falls toward a0 or b0,
    so each clamped estimate is rescaled to unit mass over [a0, b0].
    """
    _check_classes(data)
    v = as_index_array(g, data)
    c = np.atleast_1d(np.asarray(eval_points, dtype=float))
    h1, h0 = _class_bandwidths(data, v, cfg)
    a0, b0 = _support(data, v)
    delta = _delta(data, cfg, a0, b0)

    v1, v0 = v[data.positives], v[data.negatives]
    mass1 = _clamped_mass(v1, h1, cfg.kernel, a0, b0, delta)
    mass0 = _clamped_mass(v0, h0, cfg.kernel, a0, b0, delta)
    cc = _clamp(c, a0 + delta, b0 - delta)
    f1 = _primary_density(v1, cc, h1, cfg.kernel) / mass1
    f0 = _primary_density(v0, cc, h0, cfg.kernel) / mass0
    ratio = f1 / np.maximum(f0, RATIO_FLOOR)
    return DensityPair(eval_points=c, f1=f1, f0=f0, ratio=ratio,
                       a0=a0, b0=b0, h1=h1, h0=h0, delta=delta, mass1=mass1, mass0=mass0)


# ----- gradients of TP / FP in β --------------------------------------------

def _gradient_cutoffs(c, a0, b0, h):
    # freeze at a0+h / b0-h inside the support, primary estimator outside it
    inside = (c >= a0) & (c <= b0)
    return np.where(inside, _clamp(c, a0 + h, b0 - h), c)


def _class_gradient(X, lam, idx, c, h, cfg: KernelConfig) -> np.ndarray:
    finite = np.isfinite(c)
    out = np.zeros((c.shape[0], X.shape[1]))
    if not finite.any():
        return out
    cf = c[finite]
    n_y = idx.shape[0]
    K = _kernel_matrix(lam[idx], cf, h, cfg.kernel)          # n_y × m

    if cfg.gradient == "one_step":
        grad = (cf * (1.0 - cf))[:, None] * (K.T @ X[idx]) / (n_y * h)
    elif cfg.gradient == "plug_in":
        dG = (lam[idx] * (1.0 - lam[idx]))[:, None] * X[idx]
        grad = K.T @ dG / (n_y * h)
    else:
        f_y = K.sum(axis=0) / (n_y * h)
        h_all = silverman_bandwidth(lam)
        K_all = _kernel_matrix(lam, cf, h_all, cfg.kernel)
        mass = K_all.sum(axis=0)
        cond_mean = np.divide(K_all.T @ X, mass[:, None],
                              out=np.zeros((cf.shape[0], X.shape[1])), where=mass[:, None] > 0)
        grad = (cf * (1.0 - cf) * f_y)[:, None] * cond_mean

    out[finite] = grad
    return out


def grad_tp_fp(data: Dataset, model: FittedModel, cfg: KernelConfig,
               eval_points) -> Tuple[np.ndarray, np.ndarray]:
    """∇βTP̂ and ∇βFP̂ at probability-scale cutoffs; one row per cutoff."""
    _check_classes(data)
    c = np.atleast_1d(np.asarray(eval_points, dtype=float))
    X = data.design(model.columns)
    lam = model.probabilities(data)
    h1, h0 = _class_bandwidths(data, lam, cfg)
    a0, b0 = _support(data, lam)

    grad_tp = _class_gradient(X, lam, data.positives, _gradient_cutoffs(c, a0, b0, h1), h1, cfg)
    grad_fp = _class_gradient(X, lam, data.negatives, _gradient_cutoffs(c, a0, b0, h0), h0, cfg)
    return grad_tp, grad_fp

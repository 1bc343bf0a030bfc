# utils/influence.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from utils.data import Dataset
from utils.errors import DimensionMismatch, RatioUnavailable
from utils.kernels import DensityPair, KernelConfig, density_estimates, grad_tp_fp
from utils.logit import FittedModel
from utils.roc import RocCurve, roc_at_grid, weighted_tp_fp


@dataclass(frozen=True, eq=False)
class InfluenceTable:
    """Per-observation influence values; column j belongs to grid point j.

    `cutoffs` are on the probability scale. For kind="uniform-t" they are
    Λ(ĉ_t) and `psi_r`/`sigma_t` are filled; for kind="pointwise-cutoff"
    `t_grid` holds the cutoffs themselves and `psi_r` is None.
    """

    t_grid: np.ndarray
    cutoffs: np.ndarray
    psi_tp: np.ndarray
    psi_fp: np.ndarray
    psi_r: Optional[np.ndarray]
    sigma_t: Optional[np.ndarray]
    kind: str
    ratio: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.psi_tp.shape[0]

    def covariance(self) -> np.ndarray:
        """h_R(t_j, t_k) = (1/n) Σ ψ̂_R(i, t_j) ψ̂_R(i, t_k)."""
        return self.psi_r.T @ self.psi_r / self.n

    def pointwise_cov(self, j: int) -> np.ndarray:
        """Ψ̂(c_j): 2×2 covariance of (ψ̂_TP, ψ̂_FP) at column j."""
        stacked = np.column_stack([self.psi_tp[:, j], self.psi_fp[:, j]])
        return stacked.T @ stacked / self.n

    def sigma_eps(self, epsilon: float) -> np.ndarray:
        return np.maximum(self.sigma_t, epsilon)

    def to_frame(self, which: str = "r") -> pd.DataFrame:
        mat = {"r": self.psi_r, "tp": self.psi_tp, "fp": self.psi_fp}[which]
        return pd.DataFrame(mat, columns=[f"{v:.6g}" for v in self.t_grid])


# ----- pointwise pieces -----------------------------------------------------

def psi_tp_fp_at_cutoffs(data: Dataset, model: FittedModel,
                         grads: Tuple[np.ndarray, np.ndarray],
                         cutoffs) -> Tuple[np.ndarray, np.ndarray]:
    c = np.atleast_1d(np.asarray(cutoffs, dtype=float))
    grad_tp, grad_fp = grads
    k = model.beta_hat.shape[0]
    for name, gmat in (("TP", grad_tp), ("FP", grad_fp)):
        if gmat.shape != (c.shape[0], k):
            raise DimensionMismatch(f"∇{name} has shape {gmat.shape}, expected ({c.shape[0]}, {k})")
    if model.psi_beta.shape[0] != data.n:
        raise DimensionMismatch(f"model has {model.psi_beta.shape[0]} influence rows, dataset n={data.n}")

    lam = model.probabilities(data)
    tp, fp = weighted_tp_fp(lam, data.y, None, c)
    above = (lam[:, None] > c[None, :]).astype(float)
    pi = data.pi_hat

    psi_tp = (data.y / pi)[:, None] * (above - tp[None, :]) + model.psi_beta @ grad_tp.T
    psi_fp = ((1.0 - data.y) / (1.0 - pi))[:, None] * (above - fp[None, :]) + model.psi_beta @ grad_fp.T
    return psi_tp, psi_fp


def psi_r_at_t(data: Dataset, model: FittedModel, roc: RocCurve, ratio: DensityPair,
               psi_tp: np.ndarray, psi_fp: np.ndarray) -> np.ndarray:
    m = roc.t_grid.shape[0]
    if psi_tp.shape != (data.n, m) or psi_fp.shape != (data.n, m):
        raise DimensionMismatch(f"influence columns do not match the {m}-point grid")
    lr = np.asarray(ratio.ratio, dtype=float)
    if lr.shape[0] != m or not np.all(np.isfinite(lr)):
        raise RatioUnavailable("likelihood ratio is not available at every ĉ_t")
    return psi_tp - lr[None, :] * psi_fp


def analytic_sigma(psi_r: np.ndarray, epsilon: float) -> Tuple[np.ndarray, np.ndarray]:
    sigma = np.sqrt(np.mean(psi_r ** 2, axis=0))
    return sigma, np.maximum(sigma, epsilon)


# ----- assembled tables -----------------------------------------------------

def cutoffs_on_probability_scale(model: FittedModel, data: Dataset, roc: RocCurve) -> np.ndarray:
    # ĉ_t is an observed Y=0 index value; read its Λ off the same observation
    lam = model.probabilities(data)
    return np.where(roc.c_obs >= 0, lam[np.maximum(roc.c_obs, 0)], -np.inf)


def influence_table(data: Dataset, model: FittedModel, grid, cfg: KernelConfig,
                    epsilon: float = 0.01, roc: Optional[RocCurve] = None) -> InfluenceTable:
    """ψ̂_TP, ψ̂_FP and ψ̂_R evaluated at ĉ_t for every t in the grid."""
    if roc is None:
        roc = roc_at_grid(data, model.index(data), grid)
    c = cutoffs_on_probability_scale(model, data, roc)

    grads = grad_tp_fp(data, model, cfg, c)
    psi_tp, psi_fp = psi_tp_fp_at_cutoffs(data, model, grads, c)
    dens = density_estimates(data, model.probabilities(data), cfg, c)
    psi_r = psi_r_at_t(data, model, roc, dens, psi_tp, psi_fp)
    sigma, _ = analytic_sigma(psi_r, epsilon)
    return InfluenceTable(t_grid=roc.t_grid, cutoffs=c, psi_tp=psi_tp, psi_fp=psi_fp,
                          psi_r=psi_r, sigma_t=sigma, kind="uniform-t", ratio=dens.ratio)


def pointwise_table(data: Dataset, model: FittedModel, cutoffs, cfg: KernelConfig,
                    fixed_index: bool = False) -> InfluenceTable:
    """ψ̂_TP/ψ̂_FP at probability-scale cutoffs. fixed_index drops the ∇β terms."""
    c = np.atleast_1d(np.asarray(cutoffs, dtype=float))
    if fixed_index:
        k = model.beta_hat.shape[0]
        grads = (np.zeros((c.shape[0], k)), np.zeros((c.shape[0], k)))
    else:
        grads = grad_tp_fp(data, model, cfg, c)
    psi_tp, psi_fp = psi_tp_fp_at_cutoffs(data, model, grads, c)
    return InfluenceTable(t_grid=c, cutoffs=c, psi_tp=psi_tp, psi_fp=psi_fp,
                          psi_r=None, sigma_t=None, kind="pointwise-cutoff")

# utils/inference.py
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from scipy.stats import norm

from utils.data import Dataset, GridConfig, IndexValues, make_t_grid
from utils.errors import (
    BoundaryEstimate,
    DegenerateDifference,
    InvalidConfig,
    VarianceUnavailable,
)
from utils.influence import InfluenceTable, influence_table, pointwise_table
from utils.kernels import KernelConfig
from utils.logit import FittedModel
from utils.resample import (
    BootstrapConfig,
    BootstrapDraws,
    multiplier_bootstrap,
    pointwise_bootstrap_cov,
    sup_statistics,
    weighted_bootstrap,
)
from utils.roc import auc, partial_auc, roc_at_grid, weighted_tp_fp

log = logging.getLogger(__name__)

CI_METHODS = (
    "conventional_fixed_index",
    "conventional_estimated_index",
    "corrected_analytic",
    "corrected_bootstrap",
)
AUC_VARIANCE_FLOOR = 1e-6

Target = Union[str, Tuple[float, float]]


# ----- result types ---------------------------------------------------------

@dataclass(frozen=True)
class PointwiseCI:
    cutoff: float
    target: str
    estimate: float
    method: str
    level: float
    lower: float
    upper: float
    se: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class BandResult:
    t_grid: np.ndarray
    r_hat: np.ndarray
    sigma_eps: np.ndarray
    critical_value: float
    lower: np.ndarray
    upper: np.ndarray
    mode: str
    level: float
    scheme: str
    variance_source: str
    diagnostics: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.t_grid, "r_hat": self.r_hat,
                             "lower": self.lower, "upper": self.upper})

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "level": self.level, "scheme": self.scheme,
            "variance_source": self.variance_source,
            "critical_value": self.critical_value,
            "t": self.t_grid.tolist(), "r_hat": self.r_hat.tolist(),
            "sigma_eps": self.sigma_eps.tolist(),
            "lower": self.lower.tolist(), "upper": self.upper.tolist(),
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True, eq=False)
class DominanceResult:
    statistic: float
    critical_value: float
    reject: bool
    alpha: float
    argmax_t: float
    sigma_rd: np.ndarray
    t_grid: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic, "critical_value": self.critical_value,
            "reject": self.reject, "alpha": self.alpha, "argmax_t": self.argmax_t,
            "t": self.t_grid.tolist(), "sigma_rd": self.sigma_rd.tolist(),
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class AucComparison:
    auc1: float
    auc2: float
    diff: float
    se_diff: float
    z: float
    p_value: float
    v_hat_a: float
    degenerate_warning: bool
    domain: str
    variance_source: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


# ----- pointwise intervals --------------------------------------------------

def utility_weights(c: float, pi_hat: float) -> Tuple[float, float]:
    """(a, b) for a·TP + b·FP proportional to expected utility at cutoff c."""
    return (1.0 - c) * pi_hat, -c * (1.0 - pi_hat)


def _target(target: Target) -> Tuple[str, float, float]:
    if isinstance(target, str):
        table = {"tp": (1.0, 0.0), "fp": (0.0, 1.0), "tp_minus_fp": (1.0, -1.0)}
        if target not in table:
            raise InvalidConfig(f"unknown target '{target}' (tp | fp | tp_minus_fp | (a, b))")
        return (target, *table[target])
    a, b = (float(v) for v in target)
    return f"linear({a:g},{b:g})", a, b


def _z(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise InvalidConfig(f"level must lie in (0, 1), got {level}")
    return float(norm.ppf(1.0 - (1.0 - level) / 2.0))


def pointwise_ci(data: Dataset, model: Union[FittedModel, IndexValues], c: float,
                 target: Target = "tp", method: str = "corrected_analytic",
                 level: float = 0.90, kcfg: Optional[KernelConfig] = None,
                 bcfg: Optional[BootstrapConfig] = None, workers: int = 1) -> PointwiseCI:
    """Normal-approximation CI for a·TP̂(c) + b·FP̂(c).

    With a FittedModel, c is a probability-scale cutoff. A bare IndexValues is a
    fixed index and only supports the conventional methods.
    """
    if method not in CI_METHODS:
        raise InvalidConfig(f"unknown CI method '{method}' (choose from {', '.join(CI_METHODS)})")
    name, a, b = _target(target)
    z = _z(level)

    if isinstance(model, IndexValues):
        if method.startswith("corrected"):
            raise InvalidConfig("corrected intervals need a fitted first-stage model")
        score = model.g
    else:
        score = model.probabilities(data)
    tp, fp = (float(v[0]) for v in weighted_tp_fp(score, data.y, None, [c]))

    if (a != 0.0 and tp in (0.0, 1.0)) or (b != 0.0 and fp in (0.0, 1.0)):
        raise BoundaryEstimate(f"TP̂={tp:g}, FP̂={fp:g} at c={c:g}; normal approximation breaks down")

    v = np.array([a, b])
    pi = data.pi_hat
    if method.startswith("conventional"):
        var = a * a * tp * (1.0 - tp) / pi + b * b * fp * (1.0 - fp) / (1.0 - pi)
    elif method == "corrected_analytic":
        table = pointwise_table(data, model, [c], kcfg or KernelConfig())
        var = float(v @ table.pointwise_cov(0) @ v)
    else:
        bcfg = bcfg or BootstrapConfig(scheme="weighted")
        cov = pointwise_bootstrap_cov(data, c, bcfg, bcfg.boot, bcfg.seed, model=model, workers=workers)
        var = float(v @ cov @ v)

    if not np.isfinite(var) or var < 0:
        raise VarianceUnavailable(f"variance estimate {var!r} at c={c:g}")
    est = a * tp + b * fp
    se = math.sqrt(var / data.n)
    return PointwiseCI(cutoff=float(c), target=name, estimate=est, method=method, level=level,
                       lower=est - z * se, upper=est + z * se, se=se)


# ----- uniform band ---------------------------------------------------------

def _draws_for(data, models, contrast, tables, t, bcfg, workers, progress) -> BootstrapDraws:
    if bcfg.scheme == "multiplier":
        psi = sum(k * tab.psi_r for k, tab in zip(contrast, tables))
        return multiplier_bootstrap(psi, bcfg.boot, bcfg.seed, t_grid=t,
                                    workers=workers, progress=progress)
    return weighted_bootstrap(data, t, bcfg, bcfg.boot, bcfg.seed, models=models,
                              contrast=contrast, workers=workers, progress=progress)


def _tables(data, models, t, kcfg, grid_cfg, rocs, needed) -> Tuple[Optional[InfluenceTable], ...]:
    if not needed:
        return tuple(None for _ in models)
    return tuple(influence_table(data, m, t, kcfg, grid_cfg.epsilon, roc=r) for m, r in zip(models, rocs))


def _sigma(bcfg: BootstrapConfig, draws: BootstrapDraws, psi) -> Tuple[np.ndarray, str]:
    if bcfg.uses_bootstrap_variance():
        return np.sqrt(draws.variance()), "bootstrap"
    return np.sqrt(np.mean(psi ** 2, axis=0)), "analytic"


def uniform_band(data: Dataset, model: FittedModel, grid_cfg: GridConfig,
                 kcfg: Optional[KernelConfig] = None, bcfg: Optional[BootstrapConfig] = None,
                 mode: str = "two_sided", workers: int = 1, progress: bool = False) -> BandResult:
    kcfg = kcfg or KernelConfig()
    bcfg = bcfg or BootstrapConfig()
    t = make_t_grid(grid_cfg)
    roc = roc_at_grid(data, model.index(data), t)

    need_psi = bcfg.scheme == "multiplier" or not bcfg.uses_bootstrap_variance()
    (table,) = _tables(data, (model,), t, kcfg, grid_cfg, (roc,), need_psi)
    draws = _draws_for(data, (model,), (1.0,), (table,), t, bcfg, workers, progress)
    sigma, source = _sigma(bcfg, draws, table.psi_r if table is not None else None)
    sigma_eps = np.maximum(sigma, grid_cfg.epsilon)

    cv = sup_statistics(draws, sigma_eps, mode).critical_value(grid_cfg.alpha)
    half = cv * sigma_eps / math.sqrt(data.n)
    lower = roc.r_values - half
    upper = np.full_like(lower, np.inf) if mode == "one_sided" else roc.r_values + half
    log.info("%s band: critical value %.4f over %d grid points", mode, cv, t.shape[0])
    return BandResult(t_grid=t, r_hat=roc.r_values, sigma_eps=sigma_eps, critical_value=cv,
                      lower=lower, upper=upper, mode=mode, level=1.0 - grid_cfg.alpha,
                      scheme=bcfg.scheme, variance_source=source, diagnostics=draws.diagnostics())


def pointwise_band(data: Dataset, model: FittedModel, grid_cfg: GridConfig,
                   kcfg: Optional[KernelConfig] = None) -> BandResult:
    """Per-t normal intervals on the analytic σ̂_{t,ε}; no simultaneous coverage."""
    kcfg = kcfg or KernelConfig()
    t = make_t_grid(grid_cfg)
    roc = roc_at_grid(data, model.index(data), t)
    table = influence_table(data, model, t, kcfg, grid_cfg.epsilon, roc=roc)
    sigma_eps = table.sigma_eps(grid_cfg.epsilon)
    z = _z(1.0 - grid_cfg.alpha)
    half = z * sigma_eps / math.sqrt(data.n)
    return BandResult(t_grid=t, r_hat=roc.r_values, sigma_eps=sigma_eps, critical_value=z,
                      lower=roc.r_values - half, upper=roc.r_values + half, mode="pointwise",
                      level=1.0 - grid_cfg.alpha, scheme="none", variance_source="analytic")


# ----- comparing two indices ------------------------------------------------

def dominance_test(data: Dataset, model1: FittedModel, model2: FittedModel, grid_cfg: GridConfig,
                   kcfg: Optional[KernelConfig] = None, bcfg: Optional[BootstrapConfig] = None,
                   workers: int = 1, progress: bool = False) -> DominanceResult:
    """H0: R2(t) <= R1(t) on the grid, against model 2 being strictly better somewhere."""
    kcfg = kcfg or KernelConfig()
    bcfg = bcfg or BootstrapConfig()
    t = make_t_grid(grid_cfg)
    models = (model1, model2)
    rocs = tuple(roc_at_grid(data, m.index(data), t) for m in models)

    need_psi = bcfg.scheme == "multiplier" or not bcfg.uses_bootstrap_variance()
    tables = _tables(data, models, t, kcfg, grid_cfg, rocs, need_psi)
    psi_d = tables[1].psi_r - tables[0].psi_r if need_psi else None
    if psi_d is not None and not bcfg.uses_bootstrap_variance():
        if np.all(np.sqrt(np.mean(psi_d ** 2, axis=0)) <= grid_cfg.epsilon):
            raise DegenerateDifference("difference process has no variance; are the models nested or identical?")

    draws = _draws_for(data, models, (-1.0, 1.0), tables, t, bcfg, workers, progress)
    sigma, _ = _sigma(bcfg, draws, psi_d)
    if np.all(sigma <= grid_cfg.epsilon):
        raise DegenerateDifference("difference process has no variance; are the models nested or identical?")
    sigma_eps = np.maximum(sigma, grid_cfg.epsilon)

    z = math.sqrt(data.n) * (rocs[1].r_values - rocs[0].r_values) / sigma_eps
    j = int(np.argmax(z))
    stat = float(z[j])
    cv = sup_statistics(draws, sigma_eps, "one_sided").critical_value(grid_cfg.alpha)
    return DominanceResult(statistic=stat, critical_value=cv, reject=bool(stat > cv),
                           alpha=grid_cfg.alpha, argmax_t=float(t[j]), sigma_rd=sigma_eps,
                           t_grid=t, diagnostics=draws.diagnostics())


def auc_compare(data: Dataset, model1: FittedModel, model2: FittedModel, grid_cfg: GridConfig,
                kcfg: Optional[KernelConfig] = None, bcfg: Optional[BootstrapConfig] = None,
                workers: int = 1, progress: bool = False) -> AucComparison:
    """AUC₂ - AUC₁ with V̂_a from ∫(ψ̂_R,2 - ψ̂_R,1)dt over the grid."""
    kcfg = kcfg or KernelConfig()
    bcfg = bcfg or BootstrapConfig()
    t = make_t_grid(grid_cfg)
    models = (model1, model2)
    rocs = tuple(roc_at_grid(data, m.index(data), t) for m in models)

    if grid_cfg.full_range:
        a1, a2, domain = auc(data, model1.index(data)), auc(data, model2.index(data)), "full"
    else:
        a1, a2, domain = partial_auc(rocs[0]), partial_auc(rocs[1]), "grid"

    if bcfg.uses_bootstrap_variance():
        draws = weighted_bootstrap(data, t, bcfg, bcfg.boot, bcfg.seed, models=models,
                                   contrast=(-1.0, 1.0), workers=workers, progress=progress)
        areas = trapezoid(draws.draws, t, axis=1)
        v_hat = float(np.mean((areas - areas.mean()) ** 2))
        source = "bootstrap"
    else:
        tables = _tables(data, models, t, kcfg, grid_cfg, rocs, True)
        areas = trapezoid(tables[1].psi_r - tables[0].psi_r, t, axis=1)
        v_hat = float(np.mean(areas ** 2))
        source = "analytic"

    diff = a2 - a1
    se = math.sqrt(max(v_hat, 0.0) / data.n)
    degenerate = v_hat < AUC_VARIANCE_FLOOR
    if degenerate:
        log.warning("AUC difference variance %.3g is below %.0e; limit law is degenerate", v_hat, AUC_VARIANCE_FLOOR)
        z, p = float("nan"), float("nan")
    else:
        z = diff / se
        p = float(2.0 * norm.sf(abs(z)))
    return AucComparison(auc1=a1, auc2=a2, diff=diff, se_diff=se, z=z, p_value=p, v_hat_a=v_hat,
                         degenerate_warning=degenerate, domain=domain, variance_source=source)

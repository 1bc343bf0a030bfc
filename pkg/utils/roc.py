# utils/roc.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from utils.data import Dataset, as_index_array
from utils.errors import InvalidConfig

# relative slack on t * (class weight) when inverting the FP step function;
# covers rounding in grid points, never a real gap between FP steps
_INV_RTOL = 64 * np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class RocCurve:
    """R̂(t) on a t grid with the cutoffs ĉ_t that produced it."""

    t_grid: np.ndarray
    r_values: np.ndarray
    c_hat: np.ndarray
    c_obs: np.ndarray     # observation holding ĉ_t, -1 for the -inf sentinel
    auc: float
    index: np.ndarray

    def to_frame(self):
        import pandas as pd
        return pd.DataFrame({"t": self.t_grid, "r": self.r_values, "c_hat": self.c_hat})


# ----- weighted primitives (unit weights give the plain empirical versions) --

def _sorted_class(g, w, mask):
    gs, ws, idx = g[mask], w[mask], np.flatnonzero(mask)
    keep = ws > 0
    gs, ws, idx = gs[keep], ws[keep], idx[keep]
    order = np.argsort(gs, kind="stable")
    return gs[order], ws[order], idx[order]


def _mass_above(gs, cw, total, c):
    """Weight of sorted values strictly above each cutoff in c."""
    pos = np.searchsorted(gs, c, side="right")
    below = np.where(pos > 0, cw[np.maximum(pos - 1, 0)], 0.0)
    return total - below


def weighted_tp_fp(g, y, w, cutoffs) -> Tuple[np.ndarray, np.ndarray]:
    g = np.asarray(g, dtype=float)
    w = np.ones_like(g) if w is None else np.asarray(w, dtype=float)
    c = np.atleast_1d(np.asarray(cutoffs, dtype=float))
    g1, w1, _ = _sorted_class(g, w, y == 1.0)
    g0, w0, _ = _sorted_class(g, w, y == 0.0)
    W1, W0 = w1.sum(), w0.sum()
    tp = _mass_above(g1, np.cumsum(w1), W1, c) / W1
    fp = _mass_above(g0, np.cumsum(w0), W0, c) / W0
    return tp, fp


def weighted_curve(g, y, w, t_grid) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(R̂(t), ĉ_t, holder of ĉ_t) with ĉ_t = inf{c : FP̂(c) <= t}."""
    g = np.asarray(g, dtype=float)
    w = np.ones_like(g) if w is None else np.asarray(w, dtype=float)
    t = np.asarray(t_grid, dtype=float)

    g0, w0, idx0 = _sorted_class(g, w, y == 0.0)
    g1, w1, _ = _sorted_class(g, w, y == 1.0)
    W0, W1 = w0.sum(), w1.sum()
    cw0 = np.cumsum(w0)

    # weight strictly above each sorted Y=0 value (ties share the last cumsum)
    last = np.searchsorted(g0, g0, side="right") - 1
    tail = W0 - cw0[last]

    thr = t * W0 * (1.0 + _INV_RTOL)
    j = np.searchsorted(-tail, -thr, side="left")
    sentinel = thr >= W0
    jj = np.minimum(j, g0.shape[0] - 1)
    c_hat = np.where(sentinel, -np.inf, g0[jj])
    c_obs = np.where(sentinel, -1, idx0[jj])

    r = _mass_above(g1, np.cumsum(w1), W1, c_hat) / W1
    return r, c_hat, c_obs


def weighted_auc(g, y, w=None) -> float:
    """P(G1 > G0) + ½ P(G1 = G0) under the (weighted) empirical measures."""
    g = np.asarray(g, dtype=float)
    w = np.ones_like(g) if w is None else np.asarray(w, dtype=float)
    g1, w1, _ = _sorted_class(g, w, y == 1.0)
    g0, w0, _ = _sorted_class(g, w, y == 0.0)
    cw0 = np.concatenate([[0.0], np.cumsum(w0)])
    lt = cw0[np.searchsorted(g0, g1, side="left")]
    le = cw0[np.searchsorted(g0, g1, side="right")]
    credit = np.sum(w1 * (lt + 0.5 * (le - lt)))
    return float(credit / (w1.sum() * w0.sum()))


# ----- empirical ROC --------------------------------------------------------

def tp_fp_at_cutoff(data: Dataset, g, c: float) -> Tuple[float, float]:
    arr = as_index_array(g, data)
    tp, fp = weighted_tp_fp(arr, data.y, None, [c])
    return float(tp[0]), float(fp[0])


def fp_inverse(data: Dataset, g, t: float) -> float:
    if not 0.0 <= t <= 1.0:
        raise InvalidConfig(f"t must lie in [0, 1], got {t}")
    _, c_hat, _ = weighted_curve(as_index_array(g, data), data.y, None, [t])
    return float(c_hat[0])


def _check_grid(grid) -> np.ndarray:
    t = np.asarray(grid, dtype=float).ravel()
    if t.size == 0 or np.any(t < 0) or np.any(t > 1) or np.any(np.diff(t) <= 0):
        raise InvalidConfig("t grid must be strictly increasing within [0, 1]")
    return t


def roc_at_grid(data: Dataset, g, grid) -> RocCurve:
    arr = as_index_array(g, data)
    t = _check_grid(grid)
    r, c_hat, c_obs = weighted_curve(arr, data.y, None, t)
    return RocCurve(t_grid=t, r_values=r, c_hat=c_hat, c_obs=c_obs,
                    auc=weighted_auc(arr, data.y), index=arr)


def auc(data: Dataset, g) -> float:
    return weighted_auc(as_index_array(g, data), data.y)


def partial_auc(curve: RocCurve) -> float:
    """Trapezoid area under R̂ over the curve's own t grid."""
    return float(trapezoid(curve.r_values, curve.t_grid))


def roc_points(data: Dataset, g, w: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Full step locus (FP̂, TP̂) over every distinct cutoff, FP ascending."""
    arr = as_index_array(g, data)
    cuts = np.concatenate([[-np.inf], np.unique(arr)])
    tp, fp = weighted_tp_fp(arr, data.y, w, cuts)
    return fp[::-1], tp[::-1]

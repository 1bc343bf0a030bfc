# schemes/weighted.py
from __future__ import annotations

import math

import numpy as np

from utils.logit import draw_weights, fit_logit_weighted
from utils.resample import ResampleProblem, with_redraws
from utils.roc import weighted_curve


def _attempt(problem: ResampleProblem, rng: np.random.Generator) -> np.ndarray:
    data = problem.data
    w = draw_weights(rng, data.n, problem.weight_law)
    w.check_classes(data)
    row = np.zeros(problem.t_grid.shape[0])
    for k, model in enumerate(problem.models):
        mw = fit_logit_weighted(data, w, model.columns).with_transform(model.transform)
        g = mw.to_index(mw.probabilities(data))
        r_w, _, _ = weighted_curve(g, data.y, w.w, problem.t_grid)
        row += problem.contrast[k] * (r_w - problem.base_curves[k])
    return math.sqrt(data.n) * row


def replicate(problem: ResampleProblem, r: int) -> np.ndarray:
    """One weighted-bootstrap draw of √n Σ_k a_k (R̂_k^w - R̂_k); every model shares W."""
    rng = problem.rng(r)
    return with_redraws(lambda: _attempt(problem, rng))

# schemes/multiplier.py
from __future__ import annotations

import math

import numpy as np

from utils.resample import ResampleProblem


def replicate(problem: ResampleProblem, r: int) -> np.ndarray:
    psi = problem.psi
    u = problem.rng(r).standard_normal(psi.shape[0])
    return u @ psi / math.sqrt(psi.shape[0])

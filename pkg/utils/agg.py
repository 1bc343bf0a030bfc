# utils/agg.py
from __future__ import annotations

import math


def cell_key(cutoff: float, target: str, method: str) -> str:
    # 0.33 -> '0.33|tp|corrected'
    return f"{cutoff:g}|{target}|{method}"


class CoverageTally:
    """
    Keeps per-cell running counts for a Monte Carlo coverage study.
    A cell is one (cutoff, target, method) combination. Each replication adds
    one hit-or-miss per cell; an interval that could not be formed counts as
    a miss and is also tallied under `degenerate`.
    Output row example (per cell):
      {
        "cutoff": 0.5,
        "target": "tp",
        "method": "corrected",
        "truth": 0.694,
        "nominal": 0.9,
        "coverage": ...,
        "mc_se": ...,
        "reps": 2000,
        "degenerate": 3,
        "mean_width": ...
      }
    """

    def __init__(self, nominal: float):
        self.nominal = nominal
        self.state = {}   # key -> accumulators
        self.order = []   # keys in first-seen order

    def _start(self, cutoff, target, method, truth):
        return {
            "cutoff": float(cutoff),
            "target": target,
            "method": method,
            "truth": float(truth),
            "n": 0,
            "hits": 0,
            "degenerate": 0,
            "width_sum": 0.0,
            "width_n": 0,
        }

    def _update(self, st, covered, width):
        st["n"] += 1
        if covered:
            st["hits"] += 1
        if width is None:
            st["degenerate"] += 1
        else:
            st["width_sum"] += float(width)
            st["width_n"] += 1

    def _finalize(self, st):
        n = max(1, st["n"])
        cov = st["hits"] / n
        return {
            "cutoff": st["cutoff"],
            "target": st["target"],
            "method": st["method"],
            "truth": st["truth"],
            "nominal": self.nominal,
            "coverage": cov,
            "mc_se": math.sqrt(cov * (1.0 - cov) / n),
            "reps": st["n"],
            "degenerate": st["degenerate"],
            "mean_width": st["width_sum"] / st["width_n"] if st["width_n"] else float("nan"),
        }

    def add(self, cutoff, target, method, truth, covered, width=None):
        key = cell_key(cutoff, target, method)
        st = self.state.get(key)
        if st is None:
            st = self.state[key] = self._start(cutoff, target, method, truth)
            self.order.append(key)
        self._update(st, covered, width)

    def rows(self):
        return [self._finalize(self.state[k]) for k in self.order]

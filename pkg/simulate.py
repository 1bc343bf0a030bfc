from __future__ import annotations

import logging
import math
import pathlib
import sys
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from utils import config as C
from utils import store
from utils.agg import CoverageTally
from utils.data import GridConfig, IndexValues, make_t_grid
from utils.dgp import DgpSpec, draw_sample, true_values
from utils.errors import (
    BandwidthDegenerate,
    BoundaryEstimate,
    DegenerateDifference,
    DegenerateOutcome,
    ExcessiveFailures,
    FitFailure,
    InvalidConfig,
    RatioUnavailable,
    SingularAMatrix,
    TooFewPerClass,
    VarianceUnavailable,
)
from utils.inference import auc_compare, dominance_test, pointwise_ci, uniform_band
from utils.kernels import KernelConfig
from utils.logit import fit_logit
from utils.pool import resolve_workers, run_replicates
from utils.resample import BootstrapConfig

log = logging.getLogger(__name__)

# name -> (index used, interval method)
METHODS = {
    "true_conventional": ("true", "conventional_fixed_index"),
    "conventional": ("estimated", "conventional_estimated_index"),
    "corrected": ("estimated", "corrected_analytic"),
    "corrected_bootstrap": ("estimated", "corrected_bootstrap"),
}
PROCEDURES = ("band", "dominance", "auc")
DESIGNS = ("power", "size")

# two symmetric, equally informative, non-nested single-predictor indices
EQUAL_PAIR_BETA = (0.0, 1.0, 1.0)

# replication-level failures: recorded and excluded
SIM_FAILURES = (FitFailure, DegenerateOutcome, TooFewPerClass, BandwidthDegenerate,
                SingularAMatrix, RatioUnavailable, DegenerateDifference, ExcessiveFailures)

# truth draws come from a stream no replication index reaches
TRUTH_STREAM = 2 ** 32 - 1


def replicate_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence([seed, r]).generate_state(1)[0])


# ----- coverage -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoverageReport:
    frame: pd.DataFrame          # one row per (cutoff, target, method)
    spec: DgpSpec
    level: float
    reps: int
    failures: int
    seed: int
    failure_messages: tuple = ()

    def coverage(self, cutoff: float, target: str, method: str) -> float:
        f = self.frame
        hit = f[np.isclose(f["cutoff"], cutoff) & (f["target"] == target) & (f["method"] == method)]
        if hit.empty:
            raise KeyError(f"no cell for ({cutoff}, {target}, {method})")
        return float(hit["coverage"].iloc[0])

    def wide(self) -> pd.DataFrame:
        """One row per cutoff; per target a truth column then one coverage column per method."""
        rows = []
        for c, block in self.frame.groupby("cutoff", sort=False):
            row = {"cutoff": c}
            for target, tb in block.groupby("target", sort=False):
                row[f"{target}:truth"] = float(tb["truth"].iloc[0])
                for _, cell in tb.iterrows():
                    row[f"{target}:{cell['method']}"] = cell["coverage"]
                    row[f"{target}:{cell['method']}:mc_se"] = cell["mc_se"]
            rows.append(row)
        return pd.DataFrame(rows)

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(), "level": self.level, "reps": self.reps,
                "failures": self.failures, "seed": self.seed,
                "cells": self.frame.to_dict(orient="records")}


def _score_cells(data, model, true_index, cutoffs, targets, methods, truth, level, kcfg, bcfg):
    out = []
    for j, c in enumerate(cutoffs):
        for target in targets:
            value = float(truth.target(target)[j])
            for name in methods:
                which, method = METHODS[name]
                idx = true_index if which == "true" else model
                try:
                    ci = pointwise_ci(data, idx, c, target, method, level, kcfg, bcfg)
                except (BoundaryEstimate, VarianceUnavailable):
                    out.append((c, target, name, value, False, None))
                    continue
                out.append((c, target, name, value, ci.lower <= value <= ci.upper, ci.upper - ci.lower))
    return out


def coverage_experiment(spec: DgpSpec, cutoffs: Sequence[float], methods: Sequence[str],
                        R: int, level: float, seed: int,
                        targets: Sequence[str] = ("tp", "tp_minus_fp"),
                        mc_n: int = 1_000_000, kcfg: Optional[KernelConfig] = None,
                        bcfg: Optional[BootstrapConfig] = None, workers: int = 1,
                        progress: bool = False) -> CoverageReport:
    """Pointwise CI coverage of TP(c, β°) and (TP-FP)(c, β°) across R replications."""
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise InvalidConfig(f"unknown coverage method(s): {', '.join(unknown)}")
    kcfg = kcfg or KernelConfig()
    bcfg = bcfg or BootstrapConfig(scheme="weighted")
    cutoffs = [float(c) for c in cutoffs]
    truth = true_values(spec, cutoffs, mc_n, seed=[seed, TRUTH_STREAM])

    def one(r):
        data = draw_sample(spec, [seed, r])
        model = fit_logit(data, spec.signal_columns)
        true_index = IndexValues(g=spec.probabilities(data.x))
        cell_bcfg = replace(bcfg, seed=replicate_seed(bcfg.seed, r))
        return _score_cells(data, model, true_index, cutoffs, targets, methods, truth,
                            level, kcfg, cell_bcfg)

    results = run_replicates(one, R, workers=workers, progress=progress,
                             desc="coverage", capture=SIM_FAILURES)
    tally = CoverageTally(nominal=level)
    errors = []
    for _, cells, err in results:
        if err is not None:
            errors.append(err)
            continue
        for c, target, name, value, covered, width in cells:
            tally.add(c, target, name, value, covered, width)
    if errors:
        log.warning("%d of %d replications failed and were excluded", len(errors), R)
    log.info("coverage study done: n=%d, R=%d, link=%s", spec.n, R, spec.link)
    return CoverageReport(frame=pd.DataFrame(tally.rows()), spec=spec, level=level,
                          reps=R - len(errors), failures=len(errors), seed=seed,
                          failure_messages=tuple(errors))


# ----- bands and tests ------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSummary:
    procedure: str
    design: str
    rate: float            # band coverage or rejection rate
    mc_se: float
    reps: int
    failures: int
    alpha: float
    seed: int
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _pair_design(spec: DgpSpec, design: str):
    if design == "power":
        spec = spec if spec.noise else replace(spec, noise=1)
        return spec, spec.noise_columns, spec.signal_columns
    spec = replace(spec, beta_true=EQUAL_PAIR_BETA, noise=0)
    return spec, ("x1",), ("x2",)


def band_and_test_experiment(spec: DgpSpec, grid_cfg: GridConfig, procedure: str, R: int,
                             seed: int, design: str = "power",
                             kcfg: Optional[KernelConfig] = None,
                             bcfg: Optional[BootstrapConfig] = None,
                             mc_n: int = 1_000_000, workers: int = 1,
                             progress: bool = False) -> ExperimentSummary:
    """Band coverage, or dominance / AUC-comparison rejection rates, across R replications.

    design="power" compares an index on pure-noise columns (model 1) with the
    full logit (model 2); design="size" compares two symmetric single-predictor
    indices whose population curves coincide.
    """
    if procedure not in PROCEDURES:
        raise InvalidConfig(f"unknown procedure '{procedure}' (choose from {', '.join(PROCEDURES)})")
    if design not in DESIGNS:
        raise InvalidConfig(f"unknown design '{design}' (power | size)")
    kcfg = kcfg or KernelConfig()
    bcfg = bcfg or BootstrapConfig()
    alpha = grid_cfg.alpha

    if procedure == "band":
        t = make_t_grid(grid_cfg)
        truth = true_values(spec, [], mc_n, t_grid=t, seed=[seed, TRUTH_STREAM]).r

        def one(r):
            data = draw_sample(spec, [seed, r])
            model = fit_logit(data, spec.signal_columns)
            band = uniform_band(data, model, grid_cfg, kcfg,
                                replace(bcfg, seed=replicate_seed(bcfg.seed, r)))
            return bool(np.all((band.lower <= truth) & (truth <= band.upper)))
        design = "coverage"
    else:
        pair_spec, cols1, cols2 = _pair_design(spec, design)

        def one(r):
            data = draw_sample(pair_spec, [seed, r])
            m1, m2 = fit_logit(data, cols1), fit_logit(data, cols2)
            rb = replace(bcfg, seed=replicate_seed(bcfg.seed, r))
            if procedure == "dominance":
                return dominance_test(data, m1, m2, grid_cfg, kcfg, rb).reject
            res = auc_compare(data, m1, m2, grid_cfg, kcfg, rb)
            return bool(not res.degenerate_warning and res.p_value < alpha)

    results = run_replicates(one, R, workers=workers, progress=progress,
                             desc=procedure, capture=SIM_FAILURES)
    hits = [bool(v) for _, v, err in results if err is None]
    failures = R - len(hits)
    if failures:
        log.warning("%d of %d replications failed and were excluded", failures, R)
    rate = float(np.mean(hits)) if hits else float("nan")
    mc_se = math.sqrt(rate * (1.0 - rate) / len(hits)) if hits else float("nan")
    return ExperimentSummary(procedure=procedure, design=design, rate=rate, mc_se=mc_se,
                             reps=len(hits), failures=failures, alpha=alpha, seed=seed,
                             details={"spec": spec.to_dict(), "grid": asdict(grid_cfg),
                                      "kernel": kcfg.to_dict(), "bootstrap": bcfg.to_dict()})


# ----- batch run over the configured panels ---------------------------------

def _already_done(path: pathlib.Path, spec: DgpSpec, R: int, level: float, seed: int) -> bool:
    prev = store.load_json_if_exists(path)
    if not prev:
        return False
    return (prev.get("spec") == spec.to_dict() and prev.get("level") == level
            and prev.get("seed") == seed and prev.get("reps", 0) + prev.get("failures", 0) == R)


def run_panels(names: Sequence[str], out_dir: str | pathlib.Path = "results",
               cfg: Optional[dict] = None, workers: int = 1, resume: bool = False) -> dict:
    """Coverage tables per panel. With resume, panels whose report on disk
    matches the current spec, R, level and seed are skipped."""
    cfg = cfg or C.load_config()
    sim = cfg.get("simulation", {})
    R = int(sim.get("reps", 2000))
    level = float(sim.get("level", 0.90))
    seed = int(cfg.get("bootstrap", {}).get("seed", 0))
    reports = {}
    for name in names:
        try:
            spec, cutoffs = C.panel(cfg, name)
            json_path = pathlib.Path(out_dir) / store.report_key(name, "coverage", "json")
            if resume and _already_done(json_path, spec, R, level, seed):
                log.info("panel %s already on disk, skipped", name)
                continue
            rep = coverage_experiment(
                spec, cutoffs, sim.get("methods", list(METHODS)[:3]),
                R=R, level=level, seed=seed,
                targets=sim.get("targets", ["tp", "tp_minus_fp"]),
                mc_n=int(sim.get("mc_n", 1_000_000)),
                kcfg=KernelConfig.from_dict(cfg.get("kernel", {})),
                workers=workers, progress=True)
            store.write_csv(pathlib.Path(out_dir) / store.report_key(name, "coverage", "csv"), rep.wide())
            store.write_json(json_path, rep.to_dict())
            log.info("panel %s -> %d reps, %d failed", name, rep.reps, rep.failures)
            reports[name] = rep
        except InvalidConfig as e:
            log.error("panel %s: %s", name, e)
    return reports


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="[%(name)s] %(message)s")
    cfg = C.load_config()
    names = sys.argv[1:] or list(cfg.get("simulation", {}).get("panels", {}))
    run_panels(names, cfg=cfg, workers=resolve_workers(cfg.get("workers")), resume=True)

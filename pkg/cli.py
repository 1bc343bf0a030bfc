from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from typing import List, Optional, Tuple

import pandas as pd

from simulate import band_and_test_experiment, coverage_experiment
from utils import config as C
from utils import store
from utils.data import GridConfig, IndexValues, make_t_grid, read_csv
from utils.errors import InvalidConfig, RocError
from utils.inference import (
    CI_METHODS,
    auc_compare,
    dominance_test,
    pointwise_band,
    pointwise_ci,
    uniform_band,
    utility_weights,
)
from utils.kernels import KernelConfig
from utils.logit import TRANSFORMS, fit_logit
from utils.pool import resolve_workers
from utils.resample import SCHEMES, BootstrapConfig
from utils.roc import roc_at_grid

log = logging.getLogger("cli")


# ----- config resolution ----------------------------------------------------

def _csv_list(s: Optional[str]) -> Optional[List[str]]:
    if s is None:
        return None
    return [p.strip() for p in s.split(",") if p.strip()]


def _floats(s: str) -> List[float]:
    try:
        return [float(v) for v in _csv_list(s)]
    except ValueError:
        raise InvalidConfig(f"expected comma-separated numbers, got {s!r}")


def resolve_config(args: argparse.Namespace, base: Optional[dict] = None) -> dict:
    """config.yaml <- --config file <- flags. Worker count is not part of it."""
    cfg = C.merge(base, {}) if base is not None else C.load_config(args.config)
    run = dict(cfg.get("run", {}))
    run["command"] = args.command

    def put(section, key, value):
        if value is not None:
            cfg.setdefault(section, {})[key] = value

    if args.outcome is not None:
        cfg["outcome"] = args.outcome
    for key in ("input", "index", "transform", "transform2", "target", "method", "level", "mode",
                "panel", "procedure", "design"):
        v = getattr(args, key, None)
        if v is not None:
            run[key] = v
    if args.predictors is not None:
        run["predictors"] = _csv_list(args.predictors)
    if args.predictors2 is not None:
        run["predictors2"] = _csv_list(args.predictors2)
    if getattr(args, "cutoff", None) is not None:
        run["cutoffs"] = _floats(args.cutoff)

    if args.grid is not None:
        g = _floats(args.grid)
        if len(g) not in (2, 3):
            raise InvalidConfig("--grid takes tau_l,tau_u or tau_l,tau_u,step")
        put("grid", "tau_l", g[0])
        put("grid", "tau_u", g[1])
        if len(g) == 3:
            put("grid", "step", g[2])
    put("grid", "alpha", args.alpha)
    put("grid", "epsilon", args.epsilon)
    put("kernel", "kernel", args.kernel)
    put("kernel", "gradient", args.gradient)
    put("kernel", "bandwidth", args.bandwidth)
    put("bootstrap", "scheme", args.scheme)
    put("bootstrap", "boot", args.boot)
    put("bootstrap", "seed", args.seed)
    put("bootstrap", "weight_law", args.weight_law)
    put("bootstrap", "variance", args.variance)
    put("simulation", "reps", args.reps)
    put("simulation", "mc_n", getattr(args, "mc_n", None))
    for key in ("n", "link", "predictor_law"):
        put("simulation", key, getattr(args, key, None))
    put("output", "format", args.format)

    cfg.pop("workers", None)
    cfg["run"] = run
    return cfg


def _configs(cfg: dict) -> Tuple[GridConfig, KernelConfig, BootstrapConfig]:
    return (GridConfig.from_dict(cfg.get("grid", {})),
            KernelConfig.from_dict(cfg.get("kernel", {})),
            BootstrapConfig.from_dict(cfg.get("bootstrap", {})))


def _load(cfg: dict):
    run = cfg["run"]
    path = run.get("input")
    if not path:
        raise InvalidConfig("--input is required")
    try:
        return read_csv(path, cfg.get("outcome", "y"))
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InvalidConfig(f"cannot read {path}: {e}")


def _model(data, run: dict, which: str = ""):
    cols = run.get(f"predictors{which}")
    if which and not cols:
        raise InvalidConfig("comparisons need --predictors2")
    return fit_logit(data, cols).with_transform(run.get(f"transform{which}") or "identity")


def _fixed_index(data, run: dict) -> Optional[IndexValues]:
    # a column used as the score as-is, no first stage
    col = run.get("index")
    if not col:
        return None
    return IndexValues(g=data.predictors([col])[:, 0])


def _doc(cfg: dict, procedure: str, result: dict) -> dict:
    return {"procedure": procedure, "config": cfg, "result": result}


# ----- commands -------------------------------------------------------------

def cmd_roc(cfg: dict, workers: int):
    grid, _, _ = _configs(cfg)
    data = _load(cfg)
    index = _fixed_index(data, cfg["run"])
    if index is None:
        model = _model(data, cfg["run"])
        index, described = model.index(data), model.to_dict()
    else:
        described = {"index_column": cfg["run"]["index"]}
    curve = roc_at_grid(data, index, make_t_grid(grid))
    result = {"model": described, "n": data.n, "n1": data.n1, "auc": curve.auc,
              "t": curve.t_grid, "r": curve.r_values, "c_hat": curve.c_hat}
    return _doc(cfg, "roc", result), curve.to_frame()


def _target(spec: str, c: float, pi_hat: float):
    if spec in ("tp", "fp", "tp_minus_fp"):
        return spec
    if spec == "utility":
        return utility_weights(c, pi_hat)
    ab = _floats(spec)
    if len(ab) != 2:
        raise InvalidConfig(f"target must be tp, fp, tp_minus_fp, utility or a,b; got {spec!r}")
    return tuple(ab)


def cmd_ci(cfg: dict, workers: int):
    _, kcfg, bcfg = _configs(cfg)
    run = cfg["run"]
    data = _load(cfg)
    method = run.get("method") or "corrected_analytic"
    level = float(run.get("level") or 0.90)
    index = _fixed_index(data, run)
    if index is not None:
        rows = [pointwise_ci(data, index, c, _target(run.get("target") or "tp", c, data.pi_hat),
                             method, level, kcfg, bcfg, workers).to_dict()
                for c in run.get("cutoffs") or [0.5]]
        result = {"model": {"index_column": run["index"]}, "intervals": rows}
        return _doc(cfg, "ci", result), pd.DataFrame(rows)

    if method == "conventional_fixed_index":
        raise InvalidConfig("conventional_fixed_index scores a given column; pass --index COLUMN")
    model = _model(data, run)
    rows = []
    for c in run.get("cutoffs") or [0.5]:
        target = _target(run.get("target") or "tp", c, data.pi_hat)
        ci = pointwise_ci(data, model, c, target, method, level, kcfg, bcfg, workers)
        rows.append(ci.to_dict())
    return _doc(cfg, "ci", {"model": model.to_dict(), "intervals": rows}), pd.DataFrame(rows)


def cmd_band(cfg: dict, workers: int):
    grid, kcfg, bcfg = _configs(cfg)
    run = cfg["run"]
    data = _load(cfg)
    model = _model(data, run)
    mode = run.get("mode") or "two_sided"
    if mode == "pointwise":
        band = pointwise_band(data, model, grid, kcfg)
    else:
        band = uniform_band(data, model, grid, kcfg, bcfg, mode=mode, workers=workers)
    return _doc(cfg, "band", {"model": model.to_dict(), **band.to_dict()}), band.to_frame()


def cmd_dominance(cfg: dict, workers: int):
    grid, kcfg, bcfg = _configs(cfg)
    run = cfg["run"]
    data = _load(cfg)
    m1, m2 = _model(data, run), _model(data, run, "2")
    res = dominance_test(data, m1, m2, grid, kcfg, bcfg, workers=workers)
    summary = {k: v for k, v in res.to_dict().items() if k not in ("t", "sigma_rd", "diagnostics")}
    result = {"model1": m1.to_dict(), "model2": m2.to_dict(), **res.to_dict()}
    return _doc(cfg, "dominance", result), pd.DataFrame([summary])


def cmd_auc_compare(cfg: dict, workers: int):
    grid, kcfg, bcfg = _configs(cfg)
    run = cfg["run"]
    data = _load(cfg)
    m1, m2 = _model(data, run), _model(data, run, "2")
    res = auc_compare(data, m1, m2, grid, kcfg, bcfg, workers=workers)
    result = {"model1": m1.to_dict(), "model2": m2.to_dict(), **res.to_dict()}
    return _doc(cfg, "auc-compare", result), pd.DataFrame([res.to_dict()])


def cmd_simulate(cfg: dict, workers: int):
    grid, kcfg, bcfg = _configs(cfg)
    run = cfg["run"]
    sim = cfg.get("simulation", {})
    spec, cutoffs = C.panel(cfg, run.get("panel") or "B")
    overrides = {k: sim[k] for k in ("n", "link", "predictor_law") if sim.get(k) is not None}
    if overrides:
        spec = replace(spec, **overrides)
    if run.get("cutoffs"):
        cutoffs = run["cutoffs"]
    procedure = run.get("procedure") or "coverage"
    reps = int(sim.get("reps", 2000))
    mc_n = int(sim.get("mc_n", 1_000_000))

    if procedure == "coverage":
        # the corrected_bootstrap cells refit per draw, which only the weighted scheme does
        cfg = C.merge(cfg, {"bootstrap": {"scheme": "weighted"}})
        rep = coverage_experiment(spec, cutoffs, sim.get("methods", ["true_conventional", "conventional", "corrected"]),
                                  R=reps, level=float(sim.get("level", 0.90)), seed=bcfg.seed,
                                  targets=sim.get("targets", ["tp", "tp_minus_fp"]), mc_n=mc_n,
                                  kcfg=kcfg, bcfg=replace(bcfg, scheme="weighted"), workers=workers)
        return _doc(cfg, "simulate", rep.to_dict()), rep.wide()

    summary = band_and_test_experiment(spec, grid, procedure, reps, bcfg.seed,
                                       design=run.get("design") or "power",
                                       kcfg=kcfg, bcfg=bcfg, mc_n=mc_n, workers=workers)
    return _doc(cfg, "simulate", summary.to_dict()), pd.DataFrame([
        {k: v for k, v in summary.to_dict().items() if k != "details"}])


COMMANDS = {
    "roc": cmd_roc,
    "ci": cmd_ci,
    "band": cmd_band,
    "dominance": cmd_dominance,
    "auc-compare": cmd_auc_compare,
    "simulate": cmd_simulate,
}


# ----- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="YAML config or a previous JSON result to re-run")
    shared.add_argument("--input", help="CSV with a header row")
    shared.add_argument("--outcome", help="0/1 outcome column (default from config: y)")
    shared.add_argument("--predictors", help="comma-separated predictor columns (default: all)")
    shared.add_argument("--predictors2", help="predictor columns of the second model")
    shared.add_argument("--index", help="score with this column directly instead of a fitted logit")
    shared.add_argument("--transform", choices=sorted(TRANSFORMS))
    shared.add_argument("--transform2", choices=sorted(TRANSFORMS))
    shared.add_argument("--grid", help="tau_l,tau_u[,step]")
    shared.add_argument("--alpha", type=float)
    shared.add_argument("--epsilon", type=float)
    shared.add_argument("--kernel")
    shared.add_argument("--gradient")
    shared.add_argument("--bandwidth")
    shared.add_argument("--scheme", choices=SCHEMES)
    shared.add_argument("--weight-law", dest="weight_law")
    shared.add_argument("--variance", choices=("auto", "analytic", "bootstrap"))
    shared.add_argument("--boot", type=int)
    shared.add_argument("--reps", type=int)
    shared.add_argument("--seed", type=int)
    shared.add_argument("--workers", type=int, help="0 = all cores; ROC_WORKERS overrides")
    shared.add_argument("--out", help="output path (default: stdout)")
    shared.add_argument("--format", choices=("json", "csv"))
    shared.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="roc-inference",
                                description="ROC inference with an estimated first-stage index")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("roc", parents=[shared], help="empirical ROC curve and AUC")

    ci = sub.add_parser("ci", parents=[shared], help="pointwise confidence intervals")
    ci.add_argument("--cutoff", help="comma-separated probability cutoffs")
    ci.add_argument("--target", help="tp | fp | tp_minus_fp | utility | a,b")
    ci.add_argument("--method", choices=CI_METHODS)
    ci.add_argument("--level", type=float)

    band = sub.add_parser("band", parents=[shared], help="uniform confidence band")
    band.add_argument("--mode", choices=("two_sided", "one_sided", "pointwise"))

    sub.add_parser("dominance", parents=[shared], help="test whether model 2 dominates model 1")
    sub.add_parser("auc-compare", parents=[shared], help="compare the AUCs of two models")

    sim = sub.add_parser("simulate", parents=[shared], help="Monte Carlo experiments")
    sim.add_argument("--panel", help="panel name from config.yaml (default B)")
    sim.add_argument("--procedure", choices=("coverage", "band", "dominance", "auc"))
    sim.add_argument("--design", choices=("power", "size"))
    sim.add_argument("--cutoff", help="comma-separated cutoffs")
    sim.add_argument("--n", type=int)
    sim.add_argument("--link", choices=("logit", "cauchit"))
    sim.add_argument("--law", dest="predictor_law", choices=("normal01", "uniform"))
    sim.add_argument("--mc-n", dest="mc_n", type=int)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="[%(name)s] %(message)s")
    try:
        base = C.load_config(args.config)
        workers = resolve_workers(args.workers if args.workers is not None else base.get("workers"))
        cfg = resolve_config(args, base)
        doc, frame = COMMANDS[args.command](cfg, workers)
        fmt = cfg.get("output", {}).get("format", "json")
        store.emit(store.csv_bytes(frame) if fmt == "csv" else store.json_bytes(doc), args.out)
        return 0
    except RocError as e:
        sys.stderr.write(json.dumps(e.to_dict()) + "\n")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())

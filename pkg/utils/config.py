# utils/config.py
from __future__ import annotations

import copy
import json
import pathlib
from typing import Optional, Tuple

import yaml

from utils.dgp import DgpSpec
from utils.errors import InvalidConfig

DEFAULT_PATH = pathlib.Path(__file__).resolve().parent.parent / "config.yaml"


def merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _read(path: pathlib.Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidConfig(f"cannot read config {path}: {e}")
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(text)
            doc = doc.get("config", doc) if isinstance(doc, dict) else doc
        else:
            doc = yaml.safe_load(text) or {}
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise InvalidConfig(f"cannot parse config {path}: {e}")
    if not isinstance(doc, dict):
        raise InvalidConfig(f"config {path} must be a mapping")
    return doc


def load_config(extra: Optional[str | pathlib.Path] = None) -> dict:
    """Defaults from config.yaml, overlaid by a user YAML file or a prior JSON result."""
    cfg = _read(DEFAULT_PATH) if DEFAULT_PATH.exists() else {}
    if extra:
        cfg = merge(cfg, _read(pathlib.Path(extra)))
    return cfg


def panel(cfg: dict, name: str) -> Tuple[DgpSpec, list]:
    """DgpSpec and cutoffs for a named simulation panel."""
    sim = cfg.get("simulation", {})
    panels = sim.get("panels", {})
    if name not in panels:
        raise InvalidConfig(f"unknown panel '{name}' (have {', '.join(map(str, panels)) or 'none'})")
    p = dict(panels[name])
    cutoffs = p.pop("cutoffs", sim.get("cutoffs", [0.5]))
    return DgpSpec.from_dict(p), [float(c) for c in cutoffs]

# utils/store.py
from __future__ import annotations

import json
import math
import os
import pathlib
import sys
import time
from typing import Optional

import numpy as np
import pandas as pd

FLOAT_FORMAT = "%.12g"


# ----- keys -----------------------------------------------------------------

def report_key(panel: str, kind: str, ext: str) -> str:
    # B/coverage-B.csv
    return f"{panel}/{kind}-{panel}.{ext}"


# ----- encoding -------------------------------------------------------------

def _float(x: float):
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return x


def jsonable(obj):
    """Plain JSON types; non-finite floats become "+inf" / "-inf" / "nan"."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    return obj


def json_bytes(doc) -> bytes:
    return (json.dumps(jsonable(doc), sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def csv_bytes(df: pd.DataFrame) -> bytes:
    out = df.copy()
    for col in out.columns:
        if pd.api.types.is_float_dtype(out[col]):
            vals = out[col].to_numpy()
            if not np.all(np.isfinite(vals)):
                out[col] = [(_float(v) if not math.isfinite(v) else FLOAT_FORMAT % v) for v in vals]
    return out.to_csv(index=False, lineterminator="\n", float_format=FLOAT_FORMAT).encode("utf-8")


# ----- files ----------------------------------------------------------------

def _atomic_write(path: pathlib.Path, data: bytes):
    """Write to a temp name next to the target, then rename (prevents half files)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.tmp.{int(time.time() * 1000)}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_json(path: str | pathlib.Path, doc) -> None:
    _atomic_write(pathlib.Path(path), json_bytes(doc))


def write_csv(path: str | pathlib.Path, df: pd.DataFrame) -> None:
    _atomic_write(pathlib.Path(path), csv_bytes(df))


def emit(payload: bytes, out: Optional[str | pathlib.Path] = None) -> None:
    """Atomic write to `out`, or straight to stdout when no path is given."""
    if out is None or str(out) == "-":
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()
    else:
        _atomic_write(pathlib.Path(out), payload)


def load_json_if_exists(path: str | pathlib.Path):
    p = pathlib.Path(path)
    if not p.exists():
        return None
    return json.loads(p.read_text(encoding="utf-8"))

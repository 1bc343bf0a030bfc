# utils/pool.py
from __future__ import annotations

import asyncio
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, List, Optional, Tuple, Type

from tqdm import tqdm

from utils.errors import FitFailure, InvalidConfig, RocError

log = logging.getLogger(__name__)

# (replicate index, result or None, error message or None)
Outcome = Tuple[int, Any, Optional[str]]


def resolve_workers(configured=None) -> int:
    """ROC_WORKERS beats the configured value; 0 means every core."""
    raw = os.getenv("ROC_WORKERS")
    value = raw if raw not in (None, "") else configured
    try:
        n = int(value or 0)
    except (TypeError, ValueError):
        raise InvalidConfig(f"workers must be an integer, got {value!r}")
    if n < 0:
        raise InvalidConfig(f"workers must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


def _call(fn: Callable[[int], Any], r: int, capture) -> Outcome:
    try:
        return r, fn(r), None
    except capture as e:
        log.debug("replicate %d failed: %s", r, e)
        return r, None, f"{e.code}: {e}"


async def _gather(fn, count, workers, bar, capture) -> List[Outcome]:
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=workers) as ex:

        async def run_one(r):
            out = await loop.run_in_executor(ex, _call, fn, r, capture)
            if bar is not None:
                bar.update(1)
            return out

        return await asyncio.gather(*(run_one(r) for r in range(count)))


def run_replicates(fn: Callable[[int], Any], count: int, workers: int = 1,
                   progress: bool = False, desc: str = "replicates",
                   capture: Tuple[Type[RocError], ...] = (FitFailure,)) -> List[Outcome]:
    """Evaluate fn(0..count-1). Errors in `capture` come back as messages, in order."""
    bar = tqdm(total=count, desc=desc, leave=False) if progress else None
    try:
        if workers <= 1:
            out = []
            for r in range(count):
                out.append(_call(fn, r, capture))
                if bar is not None:
                    bar.update(1)
            return out
        return asyncio.run(_gather(fn, count, workers, bar, capture))
    finally:
        if bar is not None:
            bar.close()

"""Order-preserving chunked map over sample arrays."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def chunked_map(fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, workers: int = 1,
                chunk: int = 8192) -> np.ndarray:
    """Concatenate fn(points[i:i+chunk]) in input order.

    Chunks are independent, so the result does not depend on ``workers``.
    """
    points = np.asarray(points)
    pieces = [points[i:i + chunk] for i in range(0, len(points), chunk)]
    if not pieces:
        return np.asarray(fn(points))
    if workers <= 1 or len(pieces) == 1:
        return np.concatenate([np.asarray(fn(p)) for p in pieces])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.concatenate([np.asarray(r) for r in pool.map(fn, pieces)])

"""Deterministic scalar reductions used throughout the package.

Every quantity we report is ultimately a finite sum of floats.  To make
runs byte-for-byte reproducible (and invariant tolerances meaningful), all
reductions funnel through :func:`ksum`, which returns the exactly rounded
sum via compensated (Shewchuk) accumulation.  The result does not depend
on summation order, chunking, or thread count.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

__all__ = ["ksum"]

_CHUNK = 1 << 16


def _iter_chunks(flat: np.ndarray):
    for k in range(0, flat.size, _CHUNK):
        yield from flat[k : k + _CHUNK].tolist()


def ksum(values: Iterable[float] | np.ndarray) -> float:
    """Exactly rounded sum of all entries of an array or iterable."""
    if isinstance(values, np.ndarray):
        flat = np.ascontiguousarray(values, dtype=float).ravel()
        return math.fsum(_iter_chunks(flat))
    return math.fsum(values)

"""Shared oracles and helpers for the test suite."""

import math

import numpy as np
import pytest

from poincheck.weights import eval_weight


def naive_kernel_energy(u, cells, kernel, weight=None):
    """Pure-Python double loop over ordered pairs; the slow oracle."""
    grid = u.grid
    idx = [int(i) for i in cells.indices]
    points = [tuple(float(c) for c in grid.centers[i]) for i in idx]
    values = [float(u.values[i]) for i in idx]
    if weight is not None:
        wvals = [float(eval_weight(weight, float(grid.norms[i]))) for i in idx]
    else:
        wvals = None
    exponent = -(grid.d + kernel.p * kernel.s) if kernel.kind == "fractional" else None
    cutoff = 1.0 / kernel.R if getattr(kernel, "R", None) is not None else None
    measure_sq = grid.cell_measure**2
    terms = []
    m = len(idx)
    for a in range(m):
        xa = points[a]
        va = values[a]
        for b in range(m):
            if a == b:
                continue
            xb = points[b]
            if grid.d == 1:
                dist = abs(xa[0] - xb[0])
            else:
                dist = math.hypot(xa[0] - xb[0], xa[1] - xb[1])
            if kernel.kind == "fractional":
                k_val = dist**exponent
                if cutoff is not None and dist > cutoff:
                    k_val = 0.0
            elif kernel.kind == "constant_floor":
                k_val = 1.0
            else:
                raise ValueError(kernel.kind)
            w = 1.0 if wvals is None else min(wvals[a], wvals[b])
            du = abs(va - values[b])
            terms.append(du**kernel.p * k_val * w * measure_sq)
    return math.fsum(terms)


def naive_local_energy(u, cells, p, weight=None):
    """Per-cell forward differences, written as plainly as possible."""
    grid = u.grid
    members = set(int(i) for i in cells.indices)
    terms = []
    for i in members:
        sq = 0.0
        for a in range(grid.d):
            nb = int(grid.neighbors_up[i, a])
            if nb >= 0 and nb in members:
                sq += ((float(u.values[nb]) - float(u.values[i])) / grid.h) ** 2
        w = 1.0 if weight is None else eval_weight(weight, float(grid.norms[i]))
        terms.append(sq ** (p / 2.0) * w * grid.cell_measure)
    return math.fsum(terms)


def random_step_profile(rng, max_steps=10):
    """Random valid step profile (positive nonincreasing levels)."""
    from poincheck.weights import make_step_profile

    m = int(rng.integers(0, max_steps + 1))
    breaks = np.sort(rng.uniform(0.02, 0.98, size=m))
    while len(np.unique(breaks)) != m:
        breaks = np.sort(rng.uniform(0.02, 0.98, size=m))
    values = np.sort(rng.uniform(0.01, 10.0, size=m + 1))[::-1]
    return make_step_profile(breaks.tolist(), values.tolist())


@pytest.fixture
def rng():
    return np.random.default_rng(20240605)

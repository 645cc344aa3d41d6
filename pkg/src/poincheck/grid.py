"""Uniform Cartesian discretization of the unit ball and fields on it.

Cells are axis-aligned squares of width ``h = 2/N`` tiling [-1, 1]^d; a
cell belongs to the ball iff its center has Euclidean norm strictly below
one.  All integrals use midpoint quadrature (value at center times h^d)
and all reductions are exactly rounded, so results are reproducible to
the last bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics import ksum
from .weights import RadialProfile, eval_weight

__all__ = [
    "Grid",
    "GridFunction",
    "CellSet",
    "build_grid",
    "ball_cells",
    "full_cells",
    "mean",
    "weighted_mean",
    "deviation_p",
    "sample_function",
    "gridfunction_to_json",
    "gridfunction_from_json",
]


@dataclass(frozen=True, eq=False)
class Grid:
    """Cells of the discretized unit ball in dimension d (1 or 2).

    ``centers[k]`` is the coordinate of cell k, ``norms[k]`` its distance
    from the origin, and ``neighbors_up[k, a]`` / ``neighbors_down[k, a]``
    the cell index one lattice step along axis ``a`` (or -1 when that
    neighbor is outside the ball).  Enumeration order is lattice-lexicographic
    and fixed.
    """

    d: int
    N: int
    h: float
    centers: np.ndarray
    norms: np.ndarray
    lattice: np.ndarray
    neighbors_up: np.ndarray
    neighbors_down: np.ndarray

    @property
    def cell_count(self) -> int:
        return self.centers.shape[0]

    @property
    def cell_measure(self) -> float:
        return self.h**self.d


def build_grid(d: int, N: int) -> Grid:
    """Discretize the unit ball with N cells per axis on [-1, 1].

    N must be even (keeps cell centers off the origin) and at least 4.
    """
    if d not in (1, 2):
        raise ValueError(f"unsupported dimension {d}; expected 1 or 2")
    if N < 4 or N % 2 != 0:
        raise ValueError(f"N must be even and >= 4, got {N}")
    h = 2.0 / N
    axis = -1.0 + (np.arange(N) + 0.5) * h
    if d == 1:
        lattice = np.arange(N, dtype=np.int64)[:, None]
        centers = axis[:, None]
    else:
        ii, jj = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
        lattice = np.stack([ii.ravel(), jj.ravel()], axis=1).astype(np.int64)
        centers = axis[lattice]
    norms = np.linalg.norm(centers, axis=1)
    keep = norms < 1.0
    lattice = lattice[keep]
    centers = centers[keep]
    norms = norms[keep]
    n = centers.shape[0]

    id_table = -np.ones((N,) * d, dtype=np.int64)
    id_table[tuple(lattice.T)] = np.arange(n)

    def _lookup(shifted: np.ndarray) -> np.ndarray:
        inside = np.all((shifted >= 0) & (shifted < N), axis=1)
        out = -np.ones(n, dtype=np.int64)
        out[inside] = id_table[tuple(shifted[inside].T)]
        return out

    ups = np.stack(
        [_lookup(lattice + np.eye(d, dtype=np.int64)[a]) for a in range(d)], axis=1
    )
    downs = np.stack(
        [_lookup(lattice - np.eye(d, dtype=np.int64)[a]) for a in range(d)], axis=1
    )
    for arr in (centers, norms, lattice, ups, downs):
        arr.setflags(write=False)
    return Grid(
        d=d,
        N=N,
        h=h,
        centers=centers,
        norms=norms,
        lattice=lattice,
        neighbors_up=ups,
        neighbors_down=downs,
    )


@dataclass(frozen=True, eq=False)
class CellSet:
    """Sorted, unique cell indices of one grid."""

    grid: Grid
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1:
            raise ValueError("cell indices must be one-dimensional")
        if idx.size:
            if idx.min() < 0 or idx.max() >= self.grid.cell_count:
                raise ValueError("cell index out of range for grid")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("cell indices must be sorted and unique")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return int(self.indices.size)

    @property
    def measure(self) -> float:
        """Discrete measure: cell count times h^d."""
        return len(self) * self.grid.cell_measure

    def mask(self) -> np.ndarray:
        m = np.zeros(self.grid.cell_count, dtype=bool)
        m[self.indices] = True
        return m


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Scalar field on a grid, one finite value per cell."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.cell_count,):
            raise ValueError(
                f"expected {self.grid.cell_count} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def sample_function(grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> GridFunction:
    """Evaluate a vectorized callable of the (n, d) centers array."""
    return GridFunction(grid, np.asarray(fn(grid.centers), dtype=float).reshape(-1))


def ball_cells(grid: Grid, t: float) -> CellSet:
    """Cells whose center lies strictly inside the ball of radius t."""
    if not (0.0 < t <= 1.0):
        raise ValueError(f"ball radius must lie in (0, 1], got {t}")
    return CellSet(grid, np.flatnonzero(grid.norms < t))


def full_cells(grid: Grid) -> CellSet:
    """All cells (the discrete unit ball)."""
    return CellSet(grid, np.arange(grid.cell_count, dtype=np.int64))


def mean(u: GridFunction, cells: CellSet) -> float:
    """Plain average of u over a nonempty cell set (cell measures cancel)."""
    if len(cells) == 0:
        raise ValueError("cannot average over an empty cell set")
    return ksum(u.values[cells.indices]) / len(cells)


def weighted_mean(u: GridFunction, profile: RadialProfile) -> float:
    """Average of u over the whole grid against the radial weight."""
    w = eval_weight(profile, u.grid.norms)
    den = ksum(w)
    if den <= 0.0:
        raise ValueError("weight vanishes on every cell")
    return ksum(u.values * w) / den


def _weighted_mean_on(u: GridFunction, cells: CellSet, profile: RadialProfile) -> float:
    idx = cells.indices
    w = eval_weight(profile, u.grid.norms[idx])
    den = ksum(w)
    if den <= 0.0:
        raise ValueError("weight vanishes on every cell of the set")
    return ksum(u.values[idx] * w) / den


def deviation_p(
    u: GridFunction,
    cells: CellSet,
    p: float,
    profile: RadialProfile | None = None,
    center: float | None = None,
) -> float:
    """p-th power deviation of u from a center, optionally weighted.

    Computes ``sum |u_i - c|^p w_i h^d`` over the cell set, with weights
    from the profile (else 1) and ``c`` the supplied center or, when
    omitted, the matching (weighted) average over the same cells.
    """
    if len(cells) == 0:
        raise ValueError("cannot take deviation over an empty cell set")
    if p < 1.0:
        raise ValueError(f"exponent must satisfy p >= 1, got {p}")
    idx = cells.indices
    vals = u.values[idx]
    if profile is None:
        w = None
        c = mean(u, cells) if center is None else float(center)
    else:
        w = eval_weight(profile, u.grid.norms[idx])
        c = _weighted_mean_on(u, cells, profile) if center is None else float(center)
    terms = np.abs(vals - c) ** p
    if w is not None:
        terms = terms * w
    return ksum(terms) * u.grid.cell_measure


def gridfunction_to_json(u: GridFunction) -> dict:
    """Flat JSON form: grid header plus values in cell-index order."""
    return {
        "grid": {"d": u.grid.d, "N": u.grid.N},
        "values": [float(v) for v in u.values],
    }


def gridfunction_from_json(obj: dict) -> GridFunction:
    grid = build_grid(int(obj["grid"]["d"]), int(obj["grid"]["N"]))
    return GridFunction(grid, np.asarray(obj["values"], dtype=float))

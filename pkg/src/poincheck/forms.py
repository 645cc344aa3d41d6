"""Energy functionals and explicit constants for the inequality checks.

Three energies appear on right-hand sides: the gradient energy (forward
differences, midpoint quadrature), nonlocal pair energies against a kernel
(optionally truncated and weighted by the pointwise minimum of the weight
at the two endpoints), and the atomic integral of a per-radius functional
against a layer-cake measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .numerics import ksum
from .weights import LayerCakeMeasure, RadialProfile, eval_weight
from .grid import CellSet, GridFunction

__all__ = [
    "KernelSpec",
    "KIND_LOCAL",
    "KIND_FRACTIONAL",
    "KIND_FLOOR",
    "kernel_to_json",
    "kernel_from_json",
    "local_energy",
    "kernel_energy",
    "pair_coefficient_matrix",
    "transfer_constant",
    "weighted_gradient_constant",
    "integrate_atoms",
]

KIND_LOCAL = "local_gradient"
KIND_FRACTIONAL = "fractional"
KIND_FLOOR = "constant_floor"

_PAIR_BLOCK = 256


@dataclass(frozen=True)
class KernelSpec:
    """Kernel selector for the nonlocal energies.

    - ``local_gradient``: gradient energy (handled by :func:`local_energy`);
    - ``fractional``: ``|x - y| ** -(d + p*s)``, optionally restricted to
      pair distances ``<= 1/R`` (non-strict);
    - ``constant_floor``: kernel known only to be bounded below by ``c``;
      the energy itself evaluates the unit kernel and ``c`` enters the
      constants of the checks that use it.

    ``pair_multiplier``, when given, is a vectorized callable of the two
    broadcast center blocks returning an extra factor per pair.
    """

    kind: str
    p: float = 2.0
    s: float | None = None
    R: float | None = None
    c: float | None = None
    pair_multiplier: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in (KIND_LOCAL, KIND_FRACTIONAL, KIND_FLOOR):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.p < 1.0:
            raise ValueError(f"exponent must satisfy p >= 1, got {self.p}")
        if self.kind == KIND_FRACTIONAL:
            if self.s is None or not (0.0 < self.s < 1.0):
                raise ValueError(f"fractional order must lie in (0, 1), got {self.s}")
            if self.R is not None and self.R < 1.0:
                raise ValueError(f"truncation parameter must be >= 1, got {self.R}")
        if self.kind == KIND_FLOOR:
            if self.c is None or self.c <= 0.0:
                raise ValueError(f"kernel floor must be positive, got {self.c}")

    def with_p(self, p: float) -> "KernelSpec":
        return self if p == self.p else replace(self, p=float(p))


def kernel_to_json(kernel: KernelSpec) -> dict:
    out: dict = {"kind": kernel.kind, "p": kernel.p}
    for key in ("s", "R", "c"):
        val = getattr(kernel, key)
        if val is not None:
            out[key] = val
    return out


def kernel_from_json(obj: dict) -> KernelSpec:
    allowed = {"kind", "p", "s", "R", "c"}
    unknown = set(obj) - allowed
    if unknown:
        raise ValueError(f"unknown kernel fields: {sorted(unknown)}")
    return KernelSpec(**{k: obj[k] for k in allowed if k in obj})


def local_energy(
    u: GridFunction,
    cells: CellSet,
    p: float,
    weight: RadialProfile | None = None,
) -> float:
    """Gradient energy ``sum |grad_h u|^p w h^d`` over a cell set.

    The gradient uses the forward difference along each axis whose
    up-neighbor also belongs to the set (one-sided at the discrete
    boundary: missing axes are simply omitted from the Euclidean norm).
    """
    if len(cells) == 0:
        raise ValueError("cannot take energy over an empty cell set")
    if p < 1.0:
        raise ValueError(f"exponent must satisfy p >= 1, got {p}")
    grid = u.grid
    idx = cells.indices
    mask = cells.mask()
    sq = np.zeros(idx.size)
    for a in range(grid.d):
        nb = grid.neighbors_up[idx, a]
        ok = (nb >= 0) & mask[np.clip(nb, 0, None)]
        diff = np.zeros(idx.size)
        diff[ok] = (u.values[nb[ok]] - u.values[idx[ok]]) / grid.h
        sq += diff * diff
    terms = sq ** (p / 2.0)
    if weight is not None:
        terms = terms * eval_weight(weight, grid.norms[idx])
    return ksum(terms) * grid.cell_measure


def _kernel_block(dist: np.ndarray, kernel: KernelSpec, d: int) -> np.ndarray:
    """Kernel values on a block of pair distances (diagonal handled by caller)."""
    if kernel.kind == KIND_FRACTIONAL:
        safe = np.where(dist > 0.0, dist, 1.0)
        k = safe ** (-(d + kernel.p * kernel.s))
        if kernel.R is not None:
            k = np.where(dist <= 1.0 / kernel.R, k, 0.0)
        return k
    if kernel.kind == KIND_FLOOR:
        return np.ones_like(dist)
    raise ValueError("kernel energy is not defined for local_gradient kernels")


def kernel_energy(
    u: GridFunction,
    cells: CellSet,
    kernel: KernelSpec,
    weight: RadialProfile | None = None,
) -> float:
    """Nonlocal pair energy over ordered cell pairs (diagonal excluded).

    ``sum_{i != j} |u_i - u_j|^p K(x_i, x_j) W_ij h^{2d}`` with
    ``W_ij = min(w(x_i), w(x_j))`` when a weight is given, else 1.
    Accumulation is row-chunked and exactly rounded per row, so the result
    is deterministic and memory stays bounded on large cell sets.
    """
    if len(cells) == 0:
        raise ValueError("cannot take energy over an empty cell set")
    grid = u.grid
    idx = cells.indices
    X = grid.centers[idx]
    v = u.values[idx]
    m = idx.size
    phi = eval_weight(weight, grid.norms[idx]) if weight is not None else None
    scale = grid.cell_measure**2
    p = kernel.p
    row_sums: list[float] = []
    for start in range(0, m, _PAIR_BLOCK):
        stop = min(start + _PAIR_BLOCK, m)
        dist = np.linalg.norm(X[start:stop, None, :] - X[None, :, :], axis=2)
        terms = np.abs(v[start:stop, None] - v[None, :]) ** p
        terms = terms * _kernel_block(dist, kernel, grid.d)
        if kernel.pair_multiplier is not None:
            terms = terms * kernel.pair_multiplier(X[start:stop, None, :], X[None, :, :])
        if phi is not None:
            terms = terms * np.minimum(phi[start:stop, None], phi[None, :])
        rows = np.arange(start, stop)
        terms[rows - start, rows] = 0.0
        row_sums.extend(math.fsum(row.tolist()) for row in terms)
    return ksum(row_sums) * scale


def pair_coefficient_matrix(
    grid,
    cells: CellSet,
    kernel: KernelSpec,
    weight: RadialProfile | None = None,
) -> np.ndarray:
    """Dense matrix ``C_ij = K_ij W_ij h^{2d}`` with zero diagonal.

    The quadratic form ``sum_ij C_ij (u_i - u_j)^2`` reproduces
    :func:`kernel_energy` at p = 2; used for assembly.
    """
    idx = cells.indices
    X = grid.centers[idx]
    dist = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
    C = _kernel_block(dist, kernel, grid.d)
    if kernel.pair_multiplier is not None:
        C = C * kernel.pair_multiplier(X[:, None, :], X[None, :, :])
    if weight is not None:
        phi = eval_weight(weight, grid.norms[idx])
        C = C * np.minimum(phi[:, None], phi[None, :])
    np.fill_diagonal(C, 0.0)
    return C * grid.cell_measure**2


def transfer_constant(p: float, d: int, profile: RadialProfile) -> float:
    """Constant turning per-ball unweighted bounds into the weighted bound.

    ``8^p * (ball measure ratio 2^d) * (center level / level at 1/2)``.
    """
    if p < 1.0:
        raise ValueError(f"exponent must satisfy p >= 1, got {p}")
    if d not in (1, 2):
        raise ValueError(f"unsupported dimension {d}")
    return 8.0**p * 2.0**d * profile.center_value / profile.half_value


def weighted_gradient_constant(
    p: float, d: int, profile: RadialProfile, c_hat: float
) -> float:
    """Constant of the weighted gradient inequality.

    ``2^(3p+d) * (center level / level at 1/2) * c_hat`` where ``c_hat``
    is the unweighted per-ball gradient constant (an input: see the sharp
    module for the operational estimate).
    """
    if c_hat <= 0.0:
        raise ValueError(f"gradient constant must be positive, got {c_hat}")
    if p < 1.0:
        raise ValueError(f"exponent must satisfy p >= 1, got {p}")
    if d not in (1, 2):
        raise ValueError(f"unsupported dimension {d}")
    return 2.0 ** (3.0 * p + d) * profile.center_value / profile.half_value * c_hat


def integrate_atoms(F: Callable[[float], float], measure: LayerCakeMeasure) -> float:
    """Atomic integral ``sum_j w_j F(t_j)`` of a per-radius functional."""
    terms = []
    for t, w in measure.atoms:
        val = float(F(t))
        if not np.isfinite(val):
            raise ValueError(f"functional returned non-finite value at atom t={t}")
        terms.append(w * val)
    return ksum(terms)

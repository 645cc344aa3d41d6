"""Inequality checks: evaluate both sides, report the realized ratio.

Each check returns an :class:`InequalityReport` holding the left side, the
full right side (constant included), their ratio, and a pass flag at the
check's tolerance.  Checks whose discrete form is exact run at zero
tolerance; the two checks comparing independently discretized integrals
(truncation comparability and the truncated fractional bound) default to
a 5% allowance.  When both sides vanish (constant inputs) the inequality
holds vacuously: ratio 0, pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

from .numerics import ksum
from .weights import RadialProfile, describe_profile, layer_cake
from .grid import GridFunction, ball_cells, deviation_p, full_cells
from .forms import (
    KIND_FLOOR,
    KIND_FRACTIONAL,
    KernelSpec,
    kernel_energy,
    local_energy,
    transfer_constant,
    weighted_gradient_constant,
)

__all__ = [
    "InequalityReport",
    "HypothesisViolation",
    "check_transfer",
    "check_weighted_gradient",
    "check_weighted_kernel",
    "check_kernel_floor",
    "check_truncated_fractional",
    "check_truncation_bound",
    "check_shift_stability",
    "REPORT_COLUMNS",
    "report_row",
    "write_reports_csv",
    "reports_to_json",
]

# Relative slack for numeric preconditions (absorbs last-ulp rounding when a
# frozen constant was computed from the very quantities being compared).
_PRE_RTOL = 1e-9

REPORT_COLUMNS = (
    "check_id",
    "d",
    "N",
    "p",
    "s",
    "R",
    "profile",
    "lhs",
    "rhs",
    "ratio",
    "constant_used",
    "pass",
)


class HypothesisViolation(ValueError):
    """A per-ball hypothesis failed at a specific atom radius."""

    def __init__(self, message: str, atom: float):
        super().__init__(message)
        self.atom = atom


@dataclass(frozen=True)
class InequalityReport:
    """LHS/RHS of one inequality check plus the pass verdict."""

    check_id: str
    lhs: float
    rhs: float
    ratio: float
    constant_used: float
    passed: bool
    tol: float
    metadata: Mapping[str, object]

    def __post_init__(self):
        if self.lhs < 0.0 or self.rhs < 0.0:
            raise ValueError("both sides of an inequality report must be nonnegative")
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))


def _finish(check_id, lhs, rhs, constant_used, tol, metadata) -> InequalityReport:
    if lhs == 0.0 and rhs == 0.0:
        ratio, passed = 0.0, True
    elif rhs == 0.0:
        ratio, passed = math.inf, False
    else:
        ratio = lhs / rhs
        passed = ratio <= 1.0 + tol
    return InequalityReport(check_id, lhs, rhs, ratio, constant_used, passed, tol, metadata)


def _meta(grid=None, p=None, profile=None, s=None, R=None, **extra) -> dict:
    meta: dict = {}
    if grid is not None:
        meta["d"] = grid.d
        meta["N"] = grid.N
    if p is not None:
        meta["p"] = p
    if s is not None:
        meta["s"] = s
    if R is not None:
        meta["R"] = R
    if profile is not None:
        meta["profile"] = describe_profile(profile)
    meta.update(extra)
    return meta


def _within(lower: float, upper: float) -> bool:
    """lower <= upper, up to relative rounding slack."""
    return lower <= upper or math.isclose(lower, upper, rel_tol=_PRE_RTOL, abs_tol=1e-15)


def check_transfer(
    u: GridFunction,
    profile: RadialProfile,
    F: Callable[[GridFunction, float], float],
    p: float,
    tol: float = 0.0,
) -> InequalityReport:
    """Weighted deviation bound from a per-ball unweighted bound.

    ``F(u, t)`` must dominate the unweighted deviation over the ball of
    radius t (verified at each atom of the weight's layer-cake measure)
    and be shift-invariant; both are checked numerically before the main
    comparison.  The right side integrates F against the atoms and carries
    the transfer constant.
    """
    grid = u.grid
    measure = layer_cake(profile)
    f_terms = []
    for t, w in measure.atoms:
        cells_t = ball_cells(grid, t)
        dev_t = deviation_p(u, cells_t, p)
        f_t = float(F(u, t))
        if not np.isfinite(f_t):
            raise ValueError(f"functional returned non-finite value at atom t={t}")
        if not _within(dev_t, f_t):
            raise HypothesisViolation(
                f"per-ball bound fails at atom t={t}: deviation {dev_t} > F {f_t}",
                atom=t,
            )
        f_terms.append(w * f_t)
    t_last = measure.atoms[-1][0]
    shifted = GridFunction(grid, u.values + 1.0)
    f_shifted = float(F(shifted, t_last))
    if not math.isclose(f_shifted, float(F(u, t_last)), rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("functional is not shift-invariant")

    constant = transfer_constant(p, grid.d, profile)
    lhs = deviation_p(u, full_cells(grid), p, profile=profile)
    rhs = constant * ksum(f_terms)
    meta = _meta(grid, p, profile, atoms=measure.radii)
    return _finish("transfer", lhs, rhs, constant, tol, meta)


def check_weighted_gradient(
    u: GridFunction,
    profile: RadialProfile,
    p: float,
    c_hat: float,
    tol: float = 0.0,
) -> InequalityReport:
    """Weighted deviation against the weighted gradient energy."""
    grid = u.grid
    constant = weighted_gradient_constant(p, grid.d, profile, c_hat)
    lhs = deviation_p(u, full_cells(grid), p, profile=profile)
    rhs = constant * local_energy(u, full_cells(grid), p, weight=profile)
    meta = _meta(grid, p, profile, c_hat=c_hat)
    return _finish("gradient", lhs, rhs, constant, tol, meta)


def check_weighted_kernel(
    u: GridFunction,
    profile: RadialProfile,
    kernel: KernelSpec,
    p: float,
    C_unweighted: float,
    tol: float = 0.0,
) -> InequalityReport:
    """Weighted deviation against the min-weighted kernel energy.

    ``C_unweighted`` must make the unweighted per-ball bound hold at every
    atom radius of the weight (checked for the given u); the conclusion
    multiplies it by the transfer constant.
    """
    grid = u.grid
    kernel = kernel.with_p(p)
    measure = layer_cake(profile)
    for t, _ in measure.atoms:
        cells_t = ball_cells(grid, t)
        dev_t = deviation_p(u, cells_t, p)
        bound = C_unweighted * kernel_energy(u, cells_t, kernel)
        if not _within(dev_t, bound):
            raise HypothesisViolation(
                f"unweighted kernel bound fails at atom t={t}: "
                f"deviation {dev_t} > {bound}",
                atom=t,
            )
    constant = C_unweighted * transfer_constant(p, grid.d, profile)
    lhs = deviation_p(u, full_cells(grid), p, profile=profile)
    rhs = constant * kernel_energy(u, full_cells(grid), kernel, weight=profile)
    meta = _meta(grid, p, profile, s=kernel.s, R=kernel.R, C_unweighted=C_unweighted)
    return _finish("kernel", lhs, rhs, constant, tol, meta)


def check_kernel_floor(
    u: GridFunction,
    profile: RadialProfile,
    kernel: KernelSpec,
    p: float,
    tol: float = 0.0,
) -> InequalityReport:
    """Weighted deviation against a kernel bounded below by ``kernel.c``.

    The floor makes the per-ball hypothesis automatic (convexity plus the
    measure of the half ball), so no numeric precondition is needed: the
    constant is ``transfer constant / (c * half-ball measure)`` and the
    energy evaluates the unit kernel.
    """
    if kernel.kind != KIND_FLOOR:
        raise ValueError(f"expected a constant_floor kernel, got {kernel.kind!r}")
    grid = u.grid
    kernel = kernel.with_p(p)
    half_measure = ball_cells(grid, 0.5).measure
    constant = transfer_constant(p, grid.d, profile) / (kernel.c * half_measure)
    lhs = deviation_p(u, full_cells(grid), p, profile=profile)
    rhs = constant * kernel_energy(u, full_cells(grid), kernel, weight=profile)
    meta = _meta(grid, p, profile, c=kernel.c, half_measure=half_measure)
    return _finish("kernel_floor", lhs, rhs, constant, tol, meta)


def check_truncated_fractional(
    u: GridFunction,
    profile: RadialProfile,
    p: float,
    s: float,
    R: float,
    C_robust: float,
    tol: float = 0.05,
) -> InequalityReport:
    """Weighted deviation against the truncated fractional energy.

    The right side carries ``C_robust * (1 - s) * R^(p(1-s))``; a single
    ``C_robust`` frozen at one fractional order is meant to serve the whole
    sweep toward s = 1 (that is the robustness being demonstrated).
    """
    grid = u.grid
    kernel = KernelSpec(KIND_FRACTIONAL, p=p, s=s, R=R)
    constant = C_robust * (1.0 - s) * R ** (p * (1.0 - s))
    lhs = deviation_p(u, full_cells(grid), p, profile=profile)
    rhs = constant * kernel_energy(u, full_cells(grid), kernel, weight=profile)
    meta = _meta(grid, p, profile, s=s, R=R, C_robust=C_robust)
    return _finish("fractional_truncated", lhs, rhs, constant, tol, meta)


def check_truncation_bound(
    u: GridFunction,
    p: float,
    s: float,
    R: float,
    tol: float = 0.05,
) -> InequalityReport:
    """Full fractional energy against ``(3R)^(p(1-s))`` times the truncated one."""
    if R < 1.0:
        raise ValueError(f"truncation parameter must be >= 1, got {R}")
    grid = u.grid
    cells = full_cells(grid)
    lhs = kernel_energy(u, cells, KernelSpec(KIND_FRACTIONAL, p=p, s=s))
    truncated = kernel_energy(u, cells, KernelSpec(KIND_FRACTIONAL, p=p, s=s, R=R))
    factor = (3.0 * R) ** (p * (1.0 - s))
    rhs = factor * truncated
    meta = _meta(grid, p, None, s=s, R=R, truncated_energy=truncated)
    return _finish("truncation", lhs, rhs, factor, tol, meta)


def check_shift_stability(f, a: float, p: float) -> InequalityReport:
    """Shifting a mean-zero vector keeps at least half its p-norm.

    Uses counting measure: ``(sum |f_i + a|^p)^(1/p) >= (sum |f_i|^p)^(1/p) / 2``.
    Exact (zero tolerance); requires the input to sum to zero.
    """
    vals = np.asarray(f, dtype=float)
    if vals.ndim != 1 or vals.size == 0:
        raise ValueError("input must be a nonempty vector")
    if p < 1.0:
        raise ValueError(f"exponent must satisfy p >= 1, got {p}")
    total = ksum(vals)
    if abs(total) > 1e-12 * max(1.0, ksum(np.abs(vals))):
        raise ValueError(f"input must have zero sum, got {total}")
    norm_f = ksum(np.abs(vals) ** p) ** (1.0 / p)
    norm_shifted = ksum(np.abs(vals + a) ** p) ** (1.0 / p)
    meta = {
        "p": p,
        "n": int(vals.size),
        "shift": a,
        "norm": norm_f,
        "norm_shifted": norm_shifted,
    }
    return _finish("shift", 0.5 * norm_f, norm_shifted, 0.5, 0.0, meta)


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_row(report: InequalityReport) -> dict[str, str]:
    """One CSV row in the fixed column order."""
    meta = report.metadata
    return {
        "check_id": report.check_id,
        "d": _format_value(meta.get("d")),
        "N": _format_value(meta.get("N")),
        "p": _format_value(meta.get("p")),
        "s": _format_value(meta.get("s")),
        "R": _format_value(meta.get("R")),
        "profile": _format_value(meta.get("profile")),
        "lhs": repr(report.lhs),
        "rhs": repr(report.rhs),
        "ratio": repr(report.ratio),
        "constant_used": repr(report.constant_used),
        "pass": "true" if report.passed else "false",
    }


def write_reports_csv(reports, path) -> None:
    import csv

    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for report in reports:
            writer.writerow(report_row(report))


def reports_to_json(reports) -> list[dict]:
    out = []
    for report in reports:
        entry = {
            "check_id": report.check_id,
            "lhs": report.lhs,
            "rhs": report.rhs,
            "ratio": report.ratio,
            "constant_used": report.constant_used,
            "pass": report.passed,
            "tol": report.tol,
            "metadata": {k: _jsonable(v) for k, v in report.metadata.items()},
        }
        out.append(entry)
    return out


def _jsonable(value):
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value

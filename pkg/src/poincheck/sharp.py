"""Sharp-constant estimation for the p = 2 inequalities.

At p = 2 the best constant in ``weighted deviation <= C * energy`` is the
reciprocal of the smallest nonzero eigenvalue of the energy form against
the weighted mass form.  Both forms are assembled as dense matrices; the
eigenvalue is found by deflated inverse iteration with projected CG inner
solves, validated against a self-contained cyclic Jacobi oracle.  For
general p a normalized finite-difference ascent of the ratio supplies a
certified lower bound on the sharp constant.

Everything here is deterministic: fixed internal seeds, fixed iteration
schedules, no external solver dependencies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .weights import RadialProfile, eval_weight, layer_cake
from .grid import CellSet, Grid, GridFunction, ball_cells, full_cells, mean, weighted_mean
from .forms import KIND_LOCAL, KernelSpec, pair_coefficient_matrix

__all__ = [
    "QuadraticFormPair",
    "EigenConvergenceError",
    "assemble_p2",
    "assemble_transfer_p2",
    "smallest_nonzero_eigen",
    "sharp_constant_p2",
    "dense_oracle_eigen",
    "ratio_ascent",
    "estimate_gradient_constant",
]

_DENSE_CAP = 600


class EigenConvergenceError(RuntimeError):
    """Iterative eigensolve failed to reach tolerance; carries the residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class QuadraticFormPair:
    """Energy matrix A (symmetric psd, constants in its kernel) and the
    diagonal of the weighted mass matrix, both over one cell set."""

    energy: np.ndarray
    mass: np.ndarray
    grid: Grid | None = None
    cells: CellSet | None = None

    def __post_init__(self):
        A = np.asarray(self.energy, dtype=float)
        m = np.asarray(self.mass, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("energy matrix must be square")
        if m.shape != (A.shape[0],):
            raise ValueError("mass diagonal must match the energy matrix size")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        if np.any(m < 0.0):
            raise ValueError("mass entries must be nonnegative")
        scale = max(1.0, float(np.abs(A).max()) if A.size else 1.0)
        if A.size and float(np.abs(A - A.T).max()) > 1e-12 * scale:
            raise ValueError("energy matrix must be symmetric to 1e-12")
        if A.size and float(np.abs(A @ np.ones(A.shape[0])).max()) > 1e-9 * scale:
            raise ValueError("constants must lie in the kernel of the energy matrix")
        A = A.copy()
        m = m.copy()
        A.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "energy", A)
        object.__setattr__(self, "mass", m)

    @property
    def size(self) -> int:
        return self.energy.shape[0]


def _mass_diagonal(grid: Grid, cells: CellSet, weight: RadialProfile | None) -> np.ndarray:
    if weight is None:
        return np.full(len(cells), grid.cell_measure)
    return eval_weight(weight, grid.norms[cells.indices]) * grid.cell_measure


def assemble_p2(
    grid: Grid,
    cells: CellSet,
    kernel: KernelSpec,
    weight: RadialProfile | None = None,
) -> QuadraticFormPair:
    """Quadratic-form realization of an energy at p = 2 over a cell set.

    ``u' A u`` reproduces the matching energy functional for every u, and
    the mass diagonal carries the (possibly weighted) cell measures.
    """
    if kernel.p != 2.0:
        raise ValueError("quadratic assembly requires a kernel with p = 2")
    if len(cells) == 0:
        raise ValueError("cannot assemble over an empty cell set")
    n = len(cells)
    idx = cells.indices
    if kernel.kind == KIND_LOCAL:
        A = np.zeros((n, n))
        local_of = -np.ones(grid.cell_count, dtype=np.int64)
        local_of[idx] = np.arange(n)
        mask = cells.mask()
        phi = (
            eval_weight(weight, grid.norms[idx])
            if weight is not None
            else np.ones(n)
        )
        coef_scale = grid.h ** (grid.d - 2)
        for a in range(grid.d):
            nb = grid.neighbors_up[idx, a]
            ok = (nb >= 0) & mask[np.clip(nb, 0, None)]
            i_loc = np.flatnonzero(ok)
            j_loc = local_of[nb[ok]]
            coef = phi[i_loc] * coef_scale
            np.add.at(A, (i_loc, i_loc), coef)
            np.add.at(A, (j_loc, j_loc), coef)
            np.add.at(A, (i_loc, j_loc), -coef)
            np.add.at(A, (j_loc, i_loc), -coef)
    else:
        C = pair_coefficient_matrix(grid, cells, kernel, weight)
        A = 2.0 * (np.diag(C.sum(axis=1)) - C)
    return QuadraticFormPair(A, _mass_diagonal(grid, cells, weight), grid, cells)


def assemble_transfer_p2(grid: Grid, profile: RadialProfile) -> QuadraticFormPair:
    """Pair for the transfer inequality at p = 2.

    Energy: sum over the weight's atoms of (atom mass) times the per-ball
    deviation form; mass: the weighted cell measures.  Its smallest
    nonzero generalized eigenvalue inverts to the sharp transfer constant
    (before the explicit constant) on this grid.
    """
    n = grid.cell_count
    A = np.zeros((n, n))
    cells = full_cells(grid)
    for t, w in layer_cake(profile).atoms:
        if w == 0.0:
            continue
        ball = ball_cells(grid, t).indices
        nt = ball.size
        block = np.ix_(ball, ball)
        A[block] -= w * grid.cell_measure / nt
        A[ball, ball] += w * grid.cell_measure
    mass = eval_weight(profile, grid.norms) * grid.cell_measure
    return QuadraticFormPair(A, mass, grid, cells)


def _projected_cg(matvec, b, project, x0, rtol, max_iter):
    """CG on the deflated subspace; returns (solution, breakdown flag).

    Breakdown (a nonpositive curvature direction) signals that the operator
    is not positive definite there, which the caller uses to back off an
    aggressive shift.
    """
    b = project(b)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b), False
    x = project(np.array(x0, dtype=float))
    r = project(b - matvec(x))
    d = r.copy()
    rs = float(r @ r)
    threshold = (rtol * b_norm) ** 2
    it = 0
    while rs > threshold and it < max_iter:
        Ad = project(matvec(d))
        dAd = float(d @ Ad)
        if dAd <= 0.0:
            return project(x), True
        alpha = rs / dAd
        x += alpha * d
        r -= alpha * Ad
        r = project(r)
        rs_new = float(r @ r)
        d = r + (rs_new / rs) * d
        rs = rs_new
        it += 1
    return project(x), False


def _jacobi_eigh(S: np.ndarray, tol: float, max_sweeps: int, want_vectors: bool):
    """Cyclic Jacobi diagonalization of a symmetric matrix.

    Returns eigenvalues ascending (and matching eigenvector columns when
    requested).  Self-contained; used both by the dense oracle and by the
    small Ritz blocks of the iterative solver.
    """
    S = 0.5 * (S + S.T)
    n = S.shape[0]
    V = np.eye(n) if want_vectors else None
    fro = float(np.linalg.norm(S))
    if fro == 0.0:
        return np.zeros(n), V
    rot_eps = tol * fro / max(1, n)
    for _ in range(max_sweeps):
        off = float(np.sqrt(max(0.0, np.sum(S * S) - np.sum(np.diag(S) ** 2))))
        if off <= tol * fro:
            order = np.argsort(np.diag(S), kind="stable")
            vals = np.diag(S)[order].copy()
            return vals, (V[:, order].copy() if want_vectors else None)
        for i in range(n - 1):
            for j in range(i + 1, n):
                apq = S[i, j]
                if abs(apq) <= rot_eps:
                    continue
                theta = (S[j, j] - S[i, i]) / (2.0 * apq)
                t = (
                    1.0
                    if theta == 0.0
                    else np.sign(theta) / (abs(theta) + np.sqrt(1.0 + theta * theta))
                )
                c = 1.0 / np.sqrt(1.0 + t * t)
                sn = t * c
                row_i = S[i, :].copy()
                row_j = S[j, :].copy()
                S[i, :] = c * row_i - sn * row_j
                S[j, :] = sn * row_i + c * row_j
                col_i = S[:, i].copy()
                col_j = S[:, j].copy()
                S[:, i] = c * col_i - sn * col_j
                S[:, j] = sn * col_i + c * col_j
                S[i, j] = 0.0
                S[j, i] = 0.0
                if want_vectors:
                    v_i = V[:, i].copy()
                    v_j = V[:, j].copy()
                    V[:, i] = c * v_i - sn * v_j
                    V[:, j] = sn * v_i + c * v_j
    raise RuntimeError(f"Jacobi sweeps did not converge within {max_sweeps} passes")


def smallest_nonzero_eigen(
    pair: QuadraticFormPair,
    tol: float = 1e-8,
    max_iter: int = 200,
    trace: list | None = None,
):
    """Smallest nonzero generalized eigenvalue of (energy, mass).

    Transforms to symmetric form with the inverse square root of the mass,
    deflates the constant direction, and runs block inverse (subspace)
    iteration with projected-CG inner solves and a small Jacobi Ritz step
    per pass; the block absorbs near-degenerate lowest modes (symmetric
    domains carry double eigenvalues), which would stall a single-vector
    iteration.  Converges when the residual in the original variables
    satisfies ``|A v - lam D v| <= tol * |A v|``.  Returns the eigenvalue
    and the eigenvector, mass-orthogonal to constants and mass-normalized
    (embedded as a grid function when the pair knows its grid).

    Raises :class:`EigenConvergenceError` with the last relative residual
    when the iteration budget runs out.
    """
    if np.any(pair.mass <= 0.0):
        raise ValueError("eigensolve requires a strictly positive mass diagonal")
    A = pair.energy
    n = pair.size
    sqrt_m = np.sqrt(pair.mass)
    inv_sqrt = 1.0 / sqrt_m
    q = sqrt_m / np.linalg.norm(sqrt_m)

    def project(x):
        return x - q * (q @ x)

    def s_matvec(x):
        return inv_sqrt * (A @ (inv_sqrt * x))

    block = min(3, n - 1)
    if block < 1:
        raise ValueError("pair is too small to carry a nonconstant direction")
    rng = np.random.default_rng(171)
    X = np.column_stack([project(rng.standard_normal(n)) for _ in range(block)])
    X, _ = np.linalg.qr(X)
    Y = X.copy()
    lam = float("nan")
    rel_residual = 1.0
    euclid_residual = np.inf
    sigma = 0.0
    for it in range(1, max_iter + 1):
        inner_rtol = min(1e-3, max(1e-12, 0.05 * rel_residual))

        def shifted(x, _sigma=sigma):
            return s_matvec(x) - _sigma * x

        broke = False
        for col in range(block):
            Y[:, col], bad = _projected_cg(
                shifted, X[:, col], project, Y[:, col], inner_rtol, max_iter=20 * n
            )
            broke = broke or bad
        if broke:
            # the shift crossed the lowest eigenvalue; back off and retry
            sigma *= 0.5
            continue
        Z = np.column_stack([project(Y[:, col]) for col in range(block)])
        Q, _ = np.linalg.qr(Z)
        SQ = np.column_stack([s_matvec(Q[:, col]) for col in range(block)])
        ritz = Q.T @ SQ
        theta, W = _jacobi_eigh(ritz, 1e-14, 60, want_vectors=True)
        X = Q @ W
        lam = float(theta[0])
        x = X[:, 0]
        Sx = s_matvec(x)
        residual = float(np.linalg.norm(sqrt_m * (Sx - lam * x)))
        reference = float(np.linalg.norm(sqrt_m * Sx))
        rel_residual = residual / reference if reference > 0.0 else 1.0
        euclid_residual = float(np.linalg.norm(Sx - lam * x))
        if trace is not None:
            trace.append((it, lam, rel_residual))
        if reference > 0.0 and residual <= tol * reference:
            break
        # Ritz values sit above the true eigenvalue by at most the Euclidean
        # residual (symmetric Weyl bound), so this shift stays safely below
        # it while collapsing clustered bottom modes onto the block.
        if lam > 0.0 and rel_residual < 5e-3:
            margin = max(20.0 * euclid_residual, 1e-3 * lam)
            sigma = max(sigma, lam - margin)
    else:
        raise EigenConvergenceError(
            f"no convergence after {max_iter} iterations "
            f"(relative residual {rel_residual:.3e})",
            rel_residual,
        )
    x = X[:, 0]
    x = project(x)
    x /= np.linalg.norm(x)
    v = inv_sqrt * x
    if pair.grid is not None and pair.cells is not None:
        embedded = np.zeros(pair.grid.cell_count)
        embedded[pair.cells.indices] = v
        return lam, GridFunction(pair.grid, embedded)
    return lam, v


def sharp_constant_p2(
    grid: Grid, kernel: KernelSpec, weight: RadialProfile | None = None
) -> float:
    """Empirical best constant of the p = 2 inequality on the full ball."""
    pair = assemble_p2(grid, full_cells(grid), kernel, weight)
    lam, _ = smallest_nonzero_eigen(pair)
    return 1.0 / lam


def dense_oracle_eigen(
    pair: QuadraticFormPair, tol: float = 1e-12, max_sweeps: int = 100
) -> np.ndarray:
    """Full spectrum of the symmetrized pencil by cyclic Jacobi rotations.

    Validation oracle for :func:`smallest_nonzero_eigen`; capped at 600
    cells.  Sweeps until the off-diagonal Frobenius norm drops below
    ``tol`` times the matrix norm.
    """
    n = pair.size
    if n > _DENSE_CAP:
        raise ValueError(f"dense oracle capped at {_DENSE_CAP} cells, got {n}")
    if np.any(pair.mass <= 0.0):
        raise ValueError("dense oracle requires a strictly positive mass diagonal")
    inv_sqrt = 1.0 / np.sqrt(pair.mass)
    S = inv_sqrt[:, None] * pair.energy * inv_sqrt[None, :]
    vals, _ = _jacobi_eigh(S, tol, max_sweeps, want_vectors=False)
    return vals


def ratio_ascent(
    grid: Grid,
    p: float,
    lhs_functional,
    rhs_functional,
    u0: GridFunction,
    steps: int,
    step_size: float,
    weight: RadialProfile | None = None,
):
    """Locally maximize ``lhs(u) / rhs(u)`` by normalized gradient ascent.

    The gradient is a forward finite difference of the ratio (step
    ``1e-6 * |u|``), the update moves along the normalized gradient, and
    each iterate is re-centered to (weighted) mean zero and rescaled to
    unit norm; the ratio is invariant under both for the functionals used
    here.  Deterministic given (u0, steps, step_size); returns the best
    ratio seen and its grid function.  Use as a lower bound on the sharp
    constant for general p.
    """
    if p < 1.0:
        raise ValueError(f"exponent must satisfy p >= 1, got {p}")

    def ratio_of(vals):
        u = GridFunction(grid, vals)
        denom = rhs_functional(u)
        if denom <= 0.0:
            return None
        return lhs_functional(u) / denom

    def recenter(vals):
        u = GridFunction(grid, vals)
        c = mean(u, full_cells(grid)) if weight is None else weighted_mean(u, weight)
        return vals - c

    vals = np.array(u0.values, dtype=float)
    start = ratio_of(vals)
    if start is None:
        raise ValueError("rhs functional must be positive at the starting point")
    if steps == 0:
        return start, GridFunction(grid, vals)

    best_ratio = start
    best_vals = vals.copy()
    n = vals.size
    restarts = 0
    for _ in range(steps):
        base = ratio_of(vals)
        if base is None:
            restarts += 1
            noise = np.random.default_rng(900 + restarts).standard_normal(n)
            vals = best_vals + 1e-3 * max(np.linalg.norm(best_vals), 1.0) * noise
            continue
        delta = 1e-6 * np.linalg.norm(vals)
        if delta == 0.0:
            delta = 1e-6
        grad = np.zeros(n)
        for i in range(n):
            bumped = vals.copy()
            bumped[i] += delta
            r = ratio_of(bumped)
            grad[i] = 0.0 if r is None else (r - base) / delta
        gnorm = np.linalg.norm(grad)
        if gnorm == 0.0:
            break
        vals = vals + step_size * grad / gnorm
        vals = recenter(vals)
        scale = np.linalg.norm(vals)
        if scale > 0.0:
            vals = vals / scale
        r = ratio_of(vals)
        if r is not None and r > best_ratio:
            best_ratio = r
            best_vals = vals.copy()
    return best_ratio, GridFunction(grid, best_vals)


def estimate_gradient_constant(grid: Grid, radii=()) -> float:
    """Operational unweighted gradient constant at p = 2.

    For each requested ball radius (the unit ball is always included) the
    sharp per-ball constant comes from the eigensolve; dividing by the
    radius to the p-th power and maximizing gives one number valid for all
    the balls at once, which is how downstream checks consume it.
    """
    candidates = sorted(set(float(r) for r in radii) | {1.0})
    best = 0.0
    for r in candidates:
        if not (0.0 < r <= 1.0):
            raise ValueError(f"ball radius must lie in (0, 1], got {r}")
        cells = ball_cells(grid, r)
        pair = assemble_p2(grid, cells, KernelSpec(KIND_LOCAL, p=2.0))
        lam, _ = smallest_nonzero_eigen(pair)
        best = max(best, (1.0 / lam) / r**2)
    return best

"""Numerical verification of weighted and fractional Poincare inequalities
on discretized Euclidean balls, with sharp-constant estimation."""

from .weights import (
    LayerCakeMeasure,
    RadialProfile,
    eval_weight,
    layer_cake,
    make_step_profile,
    reconstruct,
    sample_profile,
    truncate_profile,
)
from .grid import (
    CellSet,
    Grid,
    GridFunction,
    ball_cells,
    build_grid,
    deviation_p,
    full_cells,
    mean,
    weighted_mean,
)
from .forms import (
    KernelSpec,
    integrate_atoms,
    kernel_energy,
    local_energy,
    transfer_constant,
    weighted_gradient_constant,
)
from .inequalities import (
    HypothesisViolation,
    InequalityReport,
    check_kernel_floor,
    check_shift_stability,
    check_transfer,
    check_truncated_fractional,
    check_truncation_bound,
    check_weighted_gradient,
    check_weighted_kernel,
)
from .sharp import (
    EigenConvergenceError,
    QuadraticFormPair,
    assemble_p2,
    assemble_transfer_p2,
    dense_oracle_eigen,
    estimate_gradient_constant,
    ratio_ascent,
    sharp_constant_p2,
    smallest_nonzero_eigen,
)

__version__ = "0.1.0"

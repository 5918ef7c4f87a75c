"""Second-variation analysis: quadratic forms, Hessians, verdicts, branches."""

from .classify import (
    GAP,
    STABLE,
    UNSTABLE,
    StabilityVerdict,
    UnsupportedBoundary,
    classify_helix,
    classify_trivial,
    classify_trivial_global,
)
from .continuation import (
    BranchPoint,
    ContinuationError,
    branch_continuation,
    discrete_critical_forces,
    onset_from_branch,
    solve_equilibrium,
)
from .forms import (
    Direction,
    analytic_modes_trivial,
    critical_forces,
    helix_witness,
    second_variation_helix,
    second_variation_trivial,
    threshold_direction,
    trivial_eigenvalue,
    trivial_mode,
)
from .hessian import Hessian, SpectrumError, SpectrumReport, assemble_hessian, smallest_eigenvalue, spectrum

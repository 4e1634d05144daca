"""Certificates and solvers for quadratic Hammerstein integral equations.

Discretizes u = b(u, u) + u0 (with (b(u, v))(t) the kernel-weighted integral
of u*v) by quadrature, checks the two-solution existence hypotheses — the
smallness condition 4*B*|u0| < 1 and cone coercivity — as an executable
certificate, and computes both positive solutions: the small branch by
monotone Picard iteration, the large branch by Newton with deflation.
"""

from . import cones, kernels, operators, scalar, solvers
from .cones import (
    Certificate,
    ConeParams,
    InvarianceReport,
    RadiiSelection,
    build_certificate,
    cone_invariance_check,
    cone_membership,
    coercivity_estimate,
    coercivity_lower_bound,
    harnack_gamma,
    lift_into_cone,
    select_radii,
)
from .kernels import (
    AnnulusRadial,
    FromFile,
    Grid,
    IntervalDirichlet,
    KernelFormatError,
    KernelMatrix,
    annulus_radial_green,
    fd_delta_defect,
    interval_green,
    kernel_matrix,
    load_kernel,
    make_grid,
    save_kernel,
)
from .operators import (
    BilinearOperator,
    ProblemInstance,
    assemble,
    bilinear_apply,
    build_problem,
    compute_u0,
    residual,
)
from .scalar import RootPair, ScalarProblem
from .solvers import (
    NonConvergenceError,
    SingularJacobianError,
    Solution,
    TwoBranchResult,
    deflated_newton,
    find_two,
    newton,
)

__version__ = "0.1.0"

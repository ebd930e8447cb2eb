"""Exponential elliptic boundary-value problems on a solid torus.

Rotation-invariant problems on the solid torus reduce to weighted problems
on the unit disk; this package meshes the disk, assembles the weighted
operators, solves the two model problems (Dirichlet volume problem and the
nonlinear-Neumann problem) and probes the sharp exponential-inequality
constants with explicit concentration families.
"""

from .errors import (
    ChartDomainError,
    ConfigError,
    DomainError,
    ExistenceWindowWarning,
    GradientBoundError,
    InfeasibleError,
    MeshResolutionWarning,
    NoBracket,
    NonConvergence,
    NoRootError,
    ModeError,
    OrderingViolation,
    SingularJacobian,
    TorusBVPError,
)
from .geometry import (
    ChartCoords,
    TorusParams,
    TorusPoint,
    boundary_area,
    chart_forward,
    chart_inverse,
    disk_point_to_torus,
    make_params,
    metric_weight,
    orbit_distance,
    orbit_distance_disk,
    volume,
)
from .mesh import (
    DiskField,
    DiskMesh,
    WeightedOperators,
    assemble,
    build_mesh,
    dirichlet_energy,
    disk_operators,
    export_tables,
    grad_energy_weighted,
    integrate_boundary,
    integrate_volume,
)
from .functionals import (
    ProblemP1,
    ProblemP2,
    constraint_A_p1,
    constraint_K,
    construct_feasible_p2,
    exp_capped,
    functional_I_p1,
    functional_I_p2,
    identity_6_14_residual,
    mean_value,
    multiplier_kappa,
)
from .solvers import (
    SolveOptions,
    SolveReport,
    find_constant_bracket,
    p1_residual_norm,
    p2_residual_norm,
    solve_p1_newton,
    solve_p1_variational,
    solve_p2_monotone,
    solve_p2_newton,
    solve_p2_variational,
)
from .inequalities import (
    BlowupFamily,
    MTScanRow,
    blowup_closed_forms,
    blowup_field,
    blowup_tube_disk_quadrature,
    corollary_check,
    corollary_scan,
    interior_orbit_family,
    minimal_orbit_family,
    moser_field,
    mt_inequality_check,
    mt_scan,
    mu_best,
    rescale_to_gradient_bound,
)
from .expressions import compile_expression

__version__ = "0.1.0"

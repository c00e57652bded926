"""First-order optimization with relative-accuracy stopping rules and
sharp-minimum linear-rate certificates.

Solvers: an adaptive similar-triangles method whose accumulator stopping
rule guarantees a target relative accuracy on convex positively
homogeneous problems, plus optimal-value-step and normalized-step
subgradient methods with geometric-rate certificates under a sharp
minimum.  The harness runs built-in test problems from JSON configs and
checks every run against its theoretical bounds.
"""

from .core import (
    ABS_TOL,
    DimensionMismatchError,
    InconsistentValueError,
    IterationLimitError,
    MissingConstantError,
    ProblemSpec,
    REL_TOL,
    SharpnessSpec,
    SolveResult,
    SolverConfig,
    TraceRecord,
    Vector,
    approx_leq,
    dot,
    norm2,
    solution_distance,
    validate_trace,
)
from .geometry import (
    Ball,
    Box,
    Halfspace,
    Intersection,
    ProjectionIterationError,
    SetSpec,
    WholeSpace,
    contains,
    distance,
    localize,
    min_norm_point,
    project,
    set_from_config,
    set_to_config,
)
from .problems import (
    BuiltinProblem,
    CertificateResult,
    distance_to_set,
    finite_diff_check,
    generate_linear_residual,
    linear_residual,
    norm_shifted_ball,
    power_norm,
    projection_certificates,
    sample_feasible,
    scaled_abs_sum,
    sharpen_power,
    sharpen_sqrt,
    weakly_quasiconvex_scalar,
)
from .subgradient import (
    alignment,
    alignment_constant_bound,
    iterations_for_relative,
    localization_radius,
    normalized_step,
    polyak_step,
    product_certificate,
    solve_normalized,
    solve_polyak,
)
from .triangles import (
    BacktrackLimitError,
    complexity_estimate,
    coupling_root,
    descent_test,
    gap_bound,
    run_adaptive,
    slack_schedule,
    smoothed_constant,
    solve_relative,
    stop_criterion,
)

__version__ = "0.1.0"

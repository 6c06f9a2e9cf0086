"""levelforge: bundle-level convex solvers with an exact projection kernel.

Ball-constrained black-box and structured saddle objectives are minimized by
level methods whose single subproblem, projection onto a short-memory
polyhedral localizer, is solved exactly by dual sign-case enumeration. A
radius-expansion wrapper lifts the solvers to unconstrained problems and
recentered variants exploit strong convexity.
"""

from .baselines import NestConfig, nest_solve
from .fapl import (
    IterationLimitError,
    POLYNOMIAL,
    RECURSIVE,
    PhaseResult,
    StepsizeRule,
    alpha_gamma_sequence,
    contraction_factor,
    fapl_phase_bound,
    fapl_phase_count_bound,
    fapl_solve,
    gap_reduction_fapl,
    stepsize,
    update_localizer,
)
from .fusl import (
    FuslPhaseResult,
    SmoothingState,
    StructuredObjective,
    fusl_phase_bound,
    fusl_solve,
    gap_reduction_fusl,
    sandwich_check,
    smoothed_eval,
)
from .oracle import Ball, FirstOrderOracle, HolderClass, linear_model, min_linear_over_ball
from .problems import (
    LeastSquaresInstance,
    TVInstance,
    dual_prox_unit_disks,
    gen_least_squares,
    gen_tv_instance,
    load_least_squares,
    load_lvlf,
    load_matrix_market,
    ls_oracle,
    make_rng,
    phantom_image,
    sample_unit_ball,
    save_least_squares,
    save_lvlf,
    save_matrix_market,
    spectral_norm,
    spectral_norm_operator,
    standard_normal,
    tv_diff,
    tv_diff_adjoint,
    tv_norm,
    tv_structured_objective,
    write_pgm,
)
from .projection import (
    DEFAULT_M_MAX,
    DualSystem,
    Polyhedron,
    ProjectionOutcome,
    assemble_dual,
    project,
    solve_kkt_case,
)
from .strongly_convex import (
    StrongConvexityInfo,
    fapl_sc_solve,
    fusl_sc_solve,
    sc_phase_count_bound,
    trust_radius,
)
from .trace import ConvergenceTrace, PhaseExit, PhaseRecord, SolveResult, TraceRow
from .unconstrained import (
    BallSolver,
    RoundRecord,
    UnconstrainedResult,
    initial_gap,
    make_fapl_ball_solver,
    solve_unconstrained,
)

__version__ = "0.1.0"

"""Incremental proximal gradient method with smooth penalization.

Solves ``minimize sum_i (f_i + h_i)(x) subject to x in argmin g`` by
cycling through the components with a growing penalty on ``grad g``, plus
PGM/FISTA baselines and the inpainting / generalized Heron benchmarks.
"""

from .errors import (
    ContractError,
    DivergenceError,
    EstimateUnconvergedError,
    InsufficientDataError,
    NoPositiveEigenvalueError,
)
from .linalg import DiagonalMask, apply, apply_transpose, make_rng, operator_norm, smallest_positive_eigenvalue
from .prox import (
    BallSet,
    IdentityTransform,
    project_ball,
    prox_dist_ball,
    prox_l1_orthogonal,
    prox_scaled_sq_norm,
    soft_threshold,
)
from .haar import HaarTransform, max_levels
from .solver import (
    ObjectiveTerm,
    PenaltyFunction,
    ProblemInstance,
    SolveReport,
    SolverState,
    StepSchedule,
    StoppingRule,
    ipg_step,
    quasi_fejer_check,
    solve,
    stopping_check,
    validate_hypotheses,
)
from .baselines import CompositeProblem, fista_step, pgm_step, run_baseline
from .problems import (
    HeronInstance,
    InpaintingInstance,
    build_heron,
    build_inpainting,
    inpainting_oracle,
    isnr,
    read_instance_manifest,
    rebuild_instance,
    traditional_composite,
    write_instance_manifest,
)

__version__ = "0.1.0"

"""Weighted product-space Douglas-Rachford splitting.

Solves m-operator monotone-inclusion problems 0 in A_1(x) + ... + A_m(x)
and sum-of-m-functions minimization by recasting them as a two-operator
fixed-point iteration on H^(m-1) under a weighted metric, with certified
step sizes for profiles mixing strongly and weakly monotone operators.
"""

from .stacks import (
    Point,
    Stack,
    Weights,
    ShapeMismatchError,
    lambda_inner,
    lambda_norm,
    embed,
    weighted_average,
)
from .operators import (
    OperatorSpec,
    Modulus,
    IllPosedResolventError,
    ResolventSolveError,
    resolvent,
    reflected_resolvent,
    modulus_of_F,
    modulus_of_G,
)
from .prox import (
    ProxIllPosedError,
    penalty_phi,
    prox_quadratic_tracking,
    prox_psd,
    prox_phi_scalar,
    prox_phi_elementwise,
    prox_phi_spectral,
    prox_grid_oracle,
)
from .reform import (
    InclusionProblem,
    ReformulationContext,
    ZeroCertificate,
    resolvent_F_warped,
    resolvent_G_warped,
    zero_certificate,
)
from .engine import (
    DrParams,
    DrState,
    IterateLog,
    RunResult,
    dr_step,
    residual,
    run,
    fejer_monitor,
    rate_monitor,
    merit_value,
)
from .planner import (
    Case,
    PlannerInput,
    PlannerResult,
    SmoothPlan,
    classify,
    feasible_delta,
    optimal_delta,
    brute_force_delta,
    naive_stepsize,
    smooth_stepsize,
)

__version__ = "0.1.0"

__all__ = [
    "Point", "Stack", "Weights", "ShapeMismatchError",
    "lambda_inner", "lambda_norm", "embed", "weighted_average",
    "OperatorSpec", "Modulus", "IllPosedResolventError", "ResolventSolveError",
    "resolvent", "reflected_resolvent", "modulus_of_F", "modulus_of_G",
    "ProxIllPosedError", "penalty_phi", "prox_quadratic_tracking", "prox_psd",
    "prox_phi_scalar", "prox_phi_elementwise", "prox_phi_spectral",
    "prox_grid_oracle",
    "InclusionProblem", "ReformulationContext", "ZeroCertificate",
    "resolvent_F_warped", "resolvent_G_warped", "zero_certificate",
    "DrParams", "DrState", "IterateLog", "RunResult",
    "dr_step", "residual", "run", "fejer_monitor", "rate_monitor", "merit_value",
    "Case", "PlannerInput", "PlannerResult", "SmoothPlan",
    "classify", "feasible_delta", "optimal_delta", "brute_force_delta",
    "naive_stepsize", "smooth_stepsize",
    "__version__",
]

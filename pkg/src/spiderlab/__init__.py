"""spiderlab: simulation and numerical verification of exponentially
penalized Walsh spiders.

A Walsh spider is a Brownian motion on finitely many half-lines glued at the
origin; away from the origin it diffuses on its current branch, and each
excursion picks a branch independently.  Penalizing the path measure with
exp(alpha_N X + gamma L) and letting the horizon grow produces one of five
limit laws depending on (alpha, gamma).  This package evaluates every closed
form attached to that picture, samples every limit process, and verifies the
relationships at desk scale with quadrature oracles and Monte Carlo tests.
"""

from .branches import (
    BranchSpace,
    PenaltyParams,
    Regime,
    RegimeTag,
    ThetaWeights,
    classify_regime,
    limit_branch_law,
    theta_weights,
)
from .closed_forms import (
    asymptotic_density_ratio,
    i_star,
    j_star,
    joint_density_local_time,
    martingale_density,
    radial_cdf_from_origin,
    radial_density,
    z_star,
    z_star_asymptotic,
    z_star_asymptotic_log,
)
from .errors import (
    ConfigError,
    DomainError,
    EmptySample,
    HeavyTailWarning,
    HorizonTooShort,
    NonFiniteSample,
    OutOfRange,
    QuadratureFailure,
    RegimeMismatch,
    SpiderlabError,
)
from .limit_laws import (
    ScalarPath,
    WeightedPath,
    sample_bang_bang_abs,
    sample_bessel3,
    sample_case2,
    sample_case4,
    sample_drifted_reflected_with_l_inf,
)
from .quadrature import QuadResult, i_exact, j_exact, z_exact
from .rng import RngStream
from .spider import (
    SpiderPath,
    excursions,
    inverse_local_time,
    occupation_local_time,
    path_stats,
    sample_reflected_batch,
    simulate_spider,
    write_path_csv,
)
from .verify import (
    CheckRecord,
    ChiSquareResult,
    KsResult,
    McEstimate,
    PenalizedRow,
    Theorem3Report,
    ZConvergenceRow,
    chi_square_fit,
    distance_correlation,
    effective_sample_size,
    ks_one_sample,
    ks_two_sample,
    martingale_check,
    mc_expectation,
    penalized_vs_limit,
    theorem3_check,
    weighted_resample,
    z_convergence_check,
)

__version__ = "0.1.0"

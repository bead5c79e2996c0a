"""salab: simulation and verification lab for constant-stepsize stochastic
approximation.

Simulates iterate ensembles, predicts limiting scaled stationary
distributions via Lyapunov equations, discovers scaling exponents, and
statistically validates the asymptotic characterizations.
"""

from .core import (
    ConfigError,
    ExperimentConfig,
    NumericalError,
    PowerScaling,
    ValidatedConfig,
    parse_config_file,
    seed_rng,
    stream_id,
    validate_config,
)
from .drift import (
    ContractionReport,
    DriftOperator,
    HurwitzReport,
    SmoothConvexCertificate,
    check_contraction,
    check_hurwitz,
    contractive_tanh,
    derivative_at_root,
    eval_drift,
    exp_square,
    grad_generic,
    grad_quadratic,
    linear,
    quartic,
    quartic_sine,
    register_drift,
)
from .lyapunov import (
    LyapunovSolution,
    predict_stationary,
    solve_lyapunov,
    solve_lyapunov_integral,
)
from .noise import NoiseModel, make_noise, sample_block, sample_noise
from .scaling import (
    ScalingReport,
    classify_limit,
    find_scaling_exponent,
    sample_limit_drift,
    scaled_drift,
)
from .sde import EmCompareResult, EmConfig, em_step, em_vs_sa_compare, run_em_ensemble
from .simulate import (
    ChainEnsemble,
    MomentSummary,
    moment_summary,
    run_ensemble,
    snapshot_scaled,
    step_chain,
)
from .stats import (
    CfResidualReport,
    DensityEstimate,
    FitReport,
    GofReport,
    batch_means_se,
    cf_residual,
    default_t_grid,
    effective_sample_size,
    estimate_density,
    gaussian_gof,
    log_density_fit,
)

__version__ = "0.1.0"

"""Residual-based recursive kernel density estimation for functional autoregressions.

The package estimates the innovation density of ``X_n = f(X_{n-1}) + eps_n``
from data alone: a recursive Nadaraya-Watson estimator tracks the unknown
drift ``f``, its one-step-behind predictions produce residuals, and a
recursive kernel density estimator with step-indexed bandwidths turns the
residual stream into a density estimate whose consistency rates and limiting
normal law depend on the noise-tail class.  Rate schedules, experiment
harnesses, and a CLI for reproducible studies are included.
"""

__version__ = "0.1.0"

from .density import DensityEstimator, GridSpec, PipelineReport, new_density, run_pipeline
from .errors import (
    ArkdeError,
    ConfigError,
    ContractViolationError,
    DimensionMismatchError,
    EmptyEstimatorError,
    InfeasibleScheduleError,
    NumericalOverflowError,
    ParameterError,
    ResourceLimitError,
    UnsupportedNoiseError,
)
from .experiments import (
    CltReport,
    ConvergenceReport,
    LlnReport,
    StationaryDensity,
    clt_study,
    convergence_study,
    fit_loglog_slope,
    ks_distance,
    lln_check,
    prediction_error_study,
    stationary_fixed_point,
)
from .kernels import KernelSpec, eval_kernel, l2_norm_sq, make_kernel, validate_A5
from .model import (
    DriftSpec,
    NoiseSpec,
    Trajectory,
    check_A1,
    crossing_frequency,
    drift_eval,
    gaussian_noise,
    laplace_noise,
    linear_drift,
    noise_density,
    simulate,
    sine_drift,
    stability_diagnostics,
    student_t_noise,
    tanh_drift,
    zero_drift,
)
from .regression import (
    DilatedSupError,
    RegressionEstimator,
    evaluate_brute_force,
    new_regression,
    sup_error_on_ball,
)
from .rng import generator_name, make_generator
from .tuning import (
    RateSchedule,
    check_A6,
    clt_admissible,
    exponential_schedule,
    gaussian_schedule,
    m_n_at,
    polynomial_schedule,
    recommend_schedule,
    truncated_schedule,
    v_at,
)

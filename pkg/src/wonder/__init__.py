"""Weighted one-shot distributed ridge regression."""

__version__ = "0.1.0"

from .errors import DomainError, ParseError, SingularSystemError, SolverError, WonderError
from .spectral import (
    AsymptoticMoments,
    SignalNoise,
    SpectralDistribution,
    are_equal_split,
    asymptotic_moments,
    equal_split_weights_risk,
    infinite_worker_limit_h,
    isotropic_moments,
    isotropic_risk,
    mp_stieltjes_derivative_isotropic,
    mp_stieltjes_isotropic,
    oe_infinite_worker_limit,
    optimal_distributed_risk,
    optimal_risk_phi,
    optimal_weight_equal_split,
    optimal_weights_isotropic,
    out_of_sample_efficiency,
    solve_companion_x,
)
from .ridge import DesignMatrix, finite_sample_weights, ridge_fit, ridge_path, trace_functionals
from .mle import ThetaEstimate, aggregate_theta, fisher_information, fit_mle, gaussian_loglik
from .data import Dataset, SynthSpec, center_normalize, generate, load_csv, save_csv, train_test_split
from .protocol import (
    LocalWorker,
    MessageLog,
    RiskReport,
    Shard,
    ShardSummary,
    WeightPlan,
    WonderConfig,
    baselines,
    local_worker,
    partition,
    wonder_general,
    wonder_isotropic,
)

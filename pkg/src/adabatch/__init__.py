"""Adaptive batch-size SGD: norm test and inner product / orthogonality test."""

from .batch import (
    BatchDecision,
    GradientBatchStats,
    ToleranceConfig,
    compute_batch_decision,
    inner_orth_batch_sizes,
    inner_orth_test_holds,
    norm_test_batch_size,
    norm_test_holds,
    optimal_split,
    rate_bound,
    step_size,
)
from .errors import (
    AdaBatchError,
    ConfigError,
    ConvergenceFailure,
    DegenerateGradient,
    DimensionMismatch,
    InvalidSmoothness,
    SingularMatrix,
    ZeroCovariance,
    ZeroTolerance,
)
from .linalg import ErrorSplit, ProjectorPair, contract, eig_extremes, error_split, projectors, unit_direction
from .objectives import Quadratic2Objective, Quadratic3Objective, StochasticObjective
from .sgd import RunRecord, SgdConfig, batch_mean_and_cov, run_sgd

__version__ = "0.1.0"

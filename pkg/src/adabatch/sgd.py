"""Constant-step SGD with adaptive batch sizes and cost/gap accounting."""

from dataclasses import dataclass, field
import math

import numpy as np

from .batch import (
    B_MAX,
    B_MIN,
    MODES,
    ORACLE,
    PLUGIN,
    GradientBatchStats,
    ToleranceConfig,
    compute_batch_decision,
    step_size,
)
from .errors import AdaBatchError, ConfigError, DegenerateGradient
from .linalg import grad_floor

NORM = "norm"
INNER_ORTH = "innerOrth"
OPTIMAL_SPLIT = "innerOrthOptimalSplit"
CONTROLLERS = (NORM, INNER_ORTH, OPTIMAL_SPLIT)

# rows per RNG draw; fixed so results do not depend on memory heuristics
CHUNK_ROWS = 1 << 18


@dataclass(frozen=True)
class SgdConfig:
    controller: str
    tolerances: ToleranceConfig
    mode: str = ORACLE
    step_size: float = None
    max_iterations: int = 1000
    max_gradient_evals: int = 10**6
    b0: int = 32
    seed: int = 0
    b_min: int = B_MIN
    b_max: int = B_MAX

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"unknown controller {self.controller!r}; pick from {CONTROLLERS}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not 1 <= self.b_min <= self.b_max:
            raise ConfigError("need 1 <= b_min <= b_max")
        if self.mode == PLUGIN and self.b_min < 2:
            raise ConfigError("plug-in mode needs b_min >= 2")
        if self.b0 < self.b_min:
            raise ConfigError("b0 must be >= b_min")
        if self.max_gradient_evals < self.b0:
            raise ConfigError("max_gradient_evals must be >= b0")
        if self.step_size is not None and not self.step_size > 0:
            raise ConfigError("step_size must be positive")

    def resolve_step_size(self, L, mu):
        if self.step_size is not None:
            return float(self.step_size)
        if self.controller == INNER_ORTH:
            return step_size(L, mu, self.tolerances)
        return step_size(L, mu, self.tolerances.epsilon)


@dataclass(frozen=True)
class IterationRecord:
    """State after update `k`: ``xi`` is the new iterate and the cost
    includes the `batch_size` draws spent on this update."""

    k: int
    xi: np.ndarray
    batch_size: int
    cumulative_cost: int
    gap: float
    grad_norm_sq: float


@dataclass
class RunRecord:
    xi0: np.ndarray
    initial_gap: float
    step_size: float
    iterations: list = field(default_factory=list)
    termination: str = ""

    @property
    def total_cost(self):
        return self.iterations[-1].cumulative_cost if self.iterations else 0

    def costs(self):
        return np.array([it.cumulative_cost for it in self.iterations], dtype=np.int64)

    def gaps(self):
        return np.array([it.gap for it in self.iterations], dtype=np.float64)

    def iterates(self):
        """All iterates including ``xi0``, shape ``(K + 1, d)``."""
        return np.vstack([self.xi0] + [it.xi for it in self.iterations])


def batch_mean_and_cov(obj, xi, b, rng, with_cov=True):
    """Mean and unbiased covariance (divisor ``b - 1``) of `b` gradient draws.

    Draws are made in fixed-size chunks and merged with the pairwise
    mean/scatter update, so memory stays bounded for large batches.
    """
    if b < 1:
        raise ValueError("batch size must be >= 1")
    if with_cov and b < 2:
        raise ValueError("sample covariance needs at least two draws")
    d = obj.dim
    n = 0
    mean = np.zeros(d)
    scatter = np.zeros((d, d))
    remaining = b
    while remaining > 0:
        m = min(remaining, CHUNK_ROWS)
        g = obj.sample_gradients(xi, m, rng)
        chunk_mean = np.ones(m) @ g / m
        if with_cov:
            centred = g - chunk_mean
            chunk_scatter = centred.T @ centred
            delta = chunk_mean - mean
            scatter += chunk_scatter + np.outer(delta, delta) * (n * m / (n + m))
        mean += (chunk_mean - mean) * (m / (n + m))
        n += m
        remaining -= m
    cov = None
    if with_cov:
        cov = 0.5 * (scatter + scatter.T) / (b - 1)
    return GradientBatchStats(mean=mean, sample_cov=cov, batch_size=b)


def _next_batch(cfg, decision):
    if cfg.controller == NORM:
        return decision.b_norm
    return decision.b_inner_orth


def run_sgd(obj, cfg, xi0):
    """Run ``xi_{k+1} = xi_k - eta * mean(batch_k)`` until a stopping rule fires.

    The batch decision made at iterate k sets the size of batch k+1; batch 0
    has size ``cfg.b0``. A run stops on ``max_iterations``, when the next
    batch would exceed ``max_gradient_evals`` ("budget"), when the reference
    gradient degenerates ("converged"), or on a controller error, which is
    recorded in ``termination`` instead of being raised.
    """
    xi = obj._point(xi0)
    if cfg.mode == ORACLE and not obj.has_oracles:
        raise ConfigError("oracle mode needs an objective with exact oracles")
    rng = np.random.default_rng(cfg.seed)
    L, mu = obj.smoothness()
    eta = cfg.resolve_step_size(L, mu)
    f_star = obj.optimal_value() if obj.has_oracles else None
    split = "optimal" if cfg.controller == OPTIMAL_SPLIT else "fixed"

    def gap_at(x):
        return obj.exact_value(x) - f_star if f_star is not None else math.nan

    def grad_sq_at(x):
        if not obj.has_oracles:
            return math.nan
        g = obj.exact_gradient(x)
        return float(g @ g)

    record = RunRecord(xi0=xi.copy(), initial_gap=gap_at(xi), step_size=eta)
    b = cfg.b0
    cost = 0
    for k in range(cfg.max_iterations):
        if cost + b > cfg.max_gradient_evals:
            record.termination = "budget"
            break
        stats = batch_mean_and_cov(obj, xi, b, rng, with_cov=cfg.mode == PLUGIN)
        cost += b
        stop = None
        try:
            if cfg.mode == ORACLE:
                decision = compute_batch_decision(
                    cfg.tolerances,
                    ORACLE,
                    sigma=obj.exact_covariance(xi),
                    grad=obj.exact_gradient(xi),
                    split=split,
                    b_min=cfg.b_min,
                    b_max=cfg.b_max,
                    floor=grad_floor(xi),
                )
            else:
                decision = compute_batch_decision(
                    cfg.tolerances,
                    PLUGIN,
                    stats=stats,
                    split=split,
                    b_min=cfg.b_min,
                    b_max=cfg.b_max,
                    floor=grad_floor(xi),
                )
        except DegenerateGradient:
            stop = "converged"
        except AdaBatchError as exc:
            stop = f"error: {exc}"
        xi = xi - eta * stats.mean
        if not np.all(np.isfinite(xi)):
            record.termination = "diverged"
            break
        record.iterations.append(
            IterationRecord(k, xi, b, cost, gap_at(xi), grad_sq_at(xi))
        )
        if stop is not None:
            record.termination = stop
            break
        b = _next_batch(cfg, decision)
    else:
        record.termination = "max_iterations"
    return record

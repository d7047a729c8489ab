"""Batch-size selection: norm test, inner product / orthogonality test.

For a size-``b`` Monte Carlo mean of gradients with single-sample covariance
``sigma`` the tests read

    norm test:          tr(sigma) / b          <= eps^2   |grad|^2
    inner product test: (sigma : P_nabla) / b  <= theta^2 |grad|^2
    orthogonality test: (sigma : P_perp) / b   <= nu^2    |grad|^2

where ``P_nabla`` projects onto the gradient direction and ``P_perp`` onto
its orthogonal complement. Batch sizes are the smallest integers satisfying
these inequalities, clamped to ``[b_min, b_max]``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    InvalidSmoothness,
    ZeroCovariance,
    ZeroTolerance,
)
from .linalg import _check_gradient, as_vector, contract, projectors, sym_matrix

B_MIN = 2
B_MAX = 10**7
COUPLING_RTOL = 1e-2
STRICT_COUPLING_RTOL = 1e-12

ORACLE = "oracle"
PLUGIN = "plugin"
MODES = (ORACLE, PLUGIN)

# case -> (epsilon, theta, nu), rounded as published
PRESET_CASES = {
    "1": (0.1, 0.05, 0.087),
    "2": (0.5, 0.25, 0.43),
    "3": (1.0, 0.5, 0.87),
    "4": (5.91, 0.9, 5.84),
}


@dataclass(frozen=True)
class ToleranceConfig:
    """Tolerances ``(epsilon, theta, nu)`` coupled by ``eps^2 = theta^2 + nu^2``.

    The default check accepts ``sqrt(theta^2 + nu^2)`` within 1% of
    ``epsilon`` so the rounded published cases load as printed; ``strict``
    tightens this to 1e-12 relative on ``eps^2``.
    """

    epsilon: float
    theta: float
    nu: float
    strict: bool = False

    def __post_init__(self):
        for name in ("epsilon", "theta", "nu"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(f"{name} must be finite and nonnegative, got {value!r}")
        eps2 = self.epsilon**2
        split2 = self.theta**2 + self.nu**2
        if self.strict:
            ok = abs(eps2 - split2) <= STRICT_COUPLING_RTOL * max(eps2, np.finfo(float).tiny)
        else:
            ok = abs(math.sqrt(split2) - self.epsilon) <= COUPLING_RTOL * self.epsilon
        if not ok and not (eps2 == 0 and split2 == 0):
            raise ConfigError(
                f"theta^2 + nu^2 = {split2:.6g} does not match epsilon^2 = {eps2:.6g}"
            )

    @classmethod
    def coupled(cls, epsilon, theta=0.0):
        """Strict config with ``nu = sqrt(eps^2 - theta^2)``."""
        if theta > epsilon:
            raise ConfigError("theta cannot exceed epsilon")
        return cls(epsilon, theta, math.sqrt(epsilon**2 - theta**2), strict=True)

    @classmethod
    def preset(cls, case, strict=False):
        try:
            eps, theta, nu = PRESET_CASES[str(case).lstrip("#")]
        except KeyError:
            raise ConfigError(f"unknown case {case!r}; known: {sorted(PRESET_CASES)}") from None
        if strict:
            return cls.coupled(eps, theta)
        return cls(eps, theta, nu)

    @property
    def split_sq(self):
        return self.theta**2 + self.nu**2


@dataclass(frozen=True)
class GradientBatchStats:
    """Mean and unbiased sample covariance of one batch of gradient draws."""

    mean: np.ndarray
    sample_cov: np.ndarray
    batch_size: int


@dataclass(frozen=True)
class BatchDecision:
    b_norm: int
    b_inner: int
    b_orth: int
    b_inner_orth: int
    mode: str
    theta: float
    nu: float
    split_fallback: bool = False


def _prepare(sigma, grad, floor):
    sigma = sym_matrix(sigma)
    grad = as_vector(grad)
    if sigma.shape != (grad.size, grad.size):
        raise DimensionMismatch(f"covariance {sigma.shape} vs gradient {grad.shape}")
    _check_gradient(grad, floor)
    return sigma, grad, float(grad @ grad)


def _ratio(num, tol, grad_sq):
    # contractions of a PSD matrix can round to tiny negatives
    if num <= 0.0:
        return 0.0
    if tol == 0.0:
        raise ZeroTolerance("zero tolerance with a nonzero variance contribution")
    return num / (tol * tol * grad_sq)


def _to_batch(x, b_min, b_max):
    if x >= b_max:
        return int(b_max)
    return int(min(max(math.ceil(x), b_min), b_max))


def split_contractions(sigma, grad, floor=None):
    """Return ``(sigma:P_nabla, sigma:P_perp, tr sigma, |grad|^2)``."""
    sigma, grad, grad_sq = _prepare(sigma, grad, floor)
    pair = projectors(grad, floor)
    return contract(sigma, pair.p_nabla), contract(sigma, pair.p_perp), float(np.trace(sigma)), grad_sq


def norm_test_holds(sigma, grad, b, epsilon, floor=None):
    sigma, grad, grad_sq = _prepare(sigma, grad, floor)
    if b < 1:
        raise ValueError("batch size must be at least 1")
    return float(np.trace(sigma)) / b <= epsilon**2 * grad_sq


def inner_orth_test_holds(sigma, grad, b, theta, nu, floor=None):
    """Return ``(inner_ok, orth_ok)`` for a size-`b` batch."""
    if b < 1:
        raise ValueError("batch size must be at least 1")
    c_par, c_perp, _, grad_sq = split_contractions(sigma, grad, floor)
    return c_par / b <= theta**2 * grad_sq, c_perp / b <= nu**2 * grad_sq


def norm_batch_size_real(sigma, grad, epsilon, floor=None):
    """Real-valued norm-test sample size before ceiling and clamping."""
    sigma, grad, grad_sq = _prepare(sigma, grad, floor)
    return _ratio(float(np.trace(sigma)), epsilon, grad_sq)


def norm_test_batch_size(sigma, grad, epsilon, b_min=B_MIN, b_max=B_MAX, floor=None):
    return _to_batch(norm_batch_size_real(sigma, grad, epsilon, floor), b_min, b_max)


def inner_orth_batch_sizes_real(sigma, grad, theta, nu, floor=None):
    c_par, c_perp, _, grad_sq = split_contractions(sigma, grad, floor)
    return _ratio(c_par, theta, grad_sq), _ratio(c_perp, nu, grad_sq)


def inner_orth_batch_sizes(sigma, grad, theta, nu, b_min=B_MIN, b_max=B_MAX, floor=None):
    """Return ``(b_inner, b_orth)``; the inner/orth batch size is their max."""
    b_inner, b_orth = inner_orth_batch_sizes_real(sigma, grad, theta, nu, floor)
    return _to_batch(b_inner, b_min, b_max), _to_batch(b_orth, b_min, b_max)


def optimal_split(sigma, grad, epsilon, floor=None):
    """Split ``eps`` into ``(theta, nu)`` so both inner/orth constraints are active.

    ``theta^2 = eps^2 (sigma:P_nabla) / tr sigma`` and
    ``nu^2 = eps^2 (sigma:P_perp) / tr sigma``; the resulting inner and
    orthogonal sample sizes both equal the norm-test sample size.
    """
    c_par, c_perp, trace, _ = split_contractions(sigma, grad, floor)
    if trace <= 0.0:
        raise ZeroCovariance("covariance trace is zero; the optimal split is undefined")
    # clip round-off so tiny negative contractions of PSD matrices stay real
    c_par = min(max(c_par, 0.0), trace)
    c_perp = min(max(c_perp, 0.0), trace)
    total = c_par + c_perp
    return epsilon * math.sqrt(c_par / total), epsilon * math.sqrt(c_perp / total)


def compute_batch_decision(
    cfg,
    mode=ORACLE,
    *,
    stats=None,
    sigma=None,
    grad=None,
    split="fixed",
    b_min=B_MIN,
    b_max=B_MAX,
    floor=None,
):
    """Evaluate every batch-size rule at one decision point.

    In oracle mode `sigma` and `grad` are the exact single-sample covariance
    and gradient. In plug-in mode `stats` supplies the batch mean in place of
    the gradient and the unbiased sample covariance in place of sigma. With
    ``split="optimal"`` the inner/orth tolerances are recomputed from
    ``cfg.epsilon``; if the covariance has zero trace the isotropic split
    ``theta^2 = eps^2 / d`` is used instead and flagged.
    """
    if mode == PLUGIN:
        if stats is None:
            raise ValueError("plug-in mode needs batch statistics")
        if stats.batch_size < 2:
            raise ValueError("plug-in covariance needs a batch of at least two")
        sigma, grad = stats.sample_cov, stats.mean
    elif mode == ORACLE:
        if sigma is None or grad is None:
            raise ValueError("oracle mode needs the exact covariance and gradient")
    else:
        raise ValueError(f"unknown mode {mode!r}")

    theta, nu, fallback = cfg.theta, cfg.nu, False
    if split == "optimal":
        try:
            theta, nu = optimal_split(sigma, grad, cfg.epsilon, floor)
        except ZeroCovariance:
            d = np.size(grad)
            theta = cfg.epsilon / math.sqrt(d)
            nu = cfg.epsilon * math.sqrt((d - 1) / d)
            fallback = True
    elif split != "fixed":
        raise ValueError(f"unknown split {split!r}")

    b_norm = norm_test_batch_size(sigma, grad, cfg.epsilon, b_min, b_max, floor)
    b_inner, b_orth = inner_orth_batch_sizes(sigma, grad, theta, nu, b_min, b_max, floor)
    return BatchDecision(
        b_norm=b_norm,
        b_inner=b_inner,
        b_orth=b_orth,
        b_inner_orth=max(b_inner, b_orth),
        mode=mode,
        theta=theta,
        nu=nu,
        split_fallback=fallback,
    )


def _tolerance_sq(tolerance):
    if isinstance(tolerance, ToleranceConfig):
        return tolerance.split_sq
    return float(tolerance) ** 2


def step_size(L, mu, tolerance):
    """Constant step ``2 / ((L + mu) (1 + tol^2))``.

    `tolerance` is either a ToleranceConfig, which contributes
    ``theta^2 + nu^2``, or a scalar ``epsilon``.
    """
    if not (mu > 0 and L >= mu and math.isfinite(L)):
        raise InvalidSmoothness(f"need L >= mu > 0, got L={L!r}, mu={mu!r}")
    return 2.0 / ((L + mu) * (1.0 + _tolerance_sq(tolerance)))


def rate_factor(kappa, tolerance):
    """Per-iteration contraction ``(((k-1)/(k+1))^2 + tol^2) / (1 + tol^2)``."""
    if kappa < 1:
        raise InvalidSmoothness(f"condition number must be >= 1, got {kappa!r}")
    t2 = _tolerance_sq(tolerance)
    if math.isinf(kappa):
        return 1.0
    return (((kappa - 1.0) / (kappa + 1.0)) ** 2 + t2) / (1.0 + t2)


def rate_bound(kappa, tolerance, k):
    """Bound ``rho^k`` on the relative mean-squared iterate error after k steps."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return rate_factor(kappa, tolerance) ** k

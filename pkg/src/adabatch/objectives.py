"""Stochastic objectives F(xi) = E[f(xi, theta)] with Monte Carlo gradients.

An objective samples gradients of f through a caller-owned
``numpy.random.Generator`` and, when ``has_oracles`` is true, also exposes
the exact gradient, value, single-sample gradient covariance and minimizer.
Objectives without oracles can only drive plug-in batch control.
"""

import math

import numpy as np

from .errors import DimensionMismatch, SingularMatrix
from .linalg import as_vector, eig_extremes, sym_matrix


class StochasticObjective:
    """Interface for objectives driven by the SGD engine.

    Subclasses must set ``dim`` and implement ``sample_gradients``. The exact
    oracles are optional; leave ``has_oracles = False`` if they are missing.
    """

    dim = None
    has_oracles = False

    def sample_gradients(self, xi, n, rng):
        """Return an ``(n, dim)`` array of i.i.d. gradient draws at `xi`."""
        raise NotImplementedError

    def sample_gradient(self, xi, rng):
        return self.sample_gradients(xi, 1, rng)[0]

    def exact_gradient(self, xi):
        raise NotImplementedError(f"{type(self).__name__} has no exact gradient oracle")

    def exact_value(self, xi):
        raise NotImplementedError(f"{type(self).__name__} has no exact value oracle")

    def exact_covariance(self, xi):
        raise NotImplementedError(f"{type(self).__name__} has no covariance oracle")

    def minimizer(self):
        raise NotImplementedError(f"{type(self).__name__} has no minimizer oracle")

    def smoothness(self):
        """Return ``(L, mu)``."""
        raise NotImplementedError(f"{type(self).__name__} has no smoothness constants")

    def optimal_value(self):
        return self.exact_value(self.minimizer())

    def _point(self, xi):
        xi = as_vector(xi)
        if xi.size != self.dim:
            raise DimensionMismatch(f"expected dimension {self.dim}, got {xi.size}")
        return xi


class Quadratic3Objective(StochasticObjective):
    """f(xi, theta) = xi.H xi / 2 - theta.xi with theta ~ N(0, noise_std^2 I_3)."""

    dim = 3
    has_oracles = True
    H = np.array([[2.0, 1.0, 1.0], [1.0, 10.0, 1.0], [1.0, 1.0, 100.0]])

    def __init__(self, noise_std=math.sqrt(1000.0)):
        if noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        self.noise_std = float(noise_std)

    def __repr__(self):
        return f"Quadratic3Objective(noise_std={self.noise_std!r})"

    def sample_gradients(self, xi, n, rng):
        xi = self._point(xi)
        noise = rng.standard_normal((n, 3))
        return self.H @ xi - self.noise_std * noise

    def exact_gradient(self, xi):
        return self.H @ self._point(xi)

    def exact_value(self, xi):
        # the -E[theta].xi term vanishes since the noise is centred
        xi = self._point(xi)
        return 0.5 * float(xi @ self.H @ xi)

    def exact_covariance(self, xi):
        self._point(xi)
        return self.noise_std**2 * np.eye(3)

    def minimizer(self):
        return np.zeros(3)

    def smoothness(self):
        lo, hi = eig_extremes(self.H)
        return hi, lo


class Quadratic2Objective(StochasticObjective):
    """f(xi, t) = xi.H(t) xi / 2 - b.xi, H(t) = (1 - t) I + t A, t ~ U(0, 1).

    ``A = [[2 kappa, 0.5], [0.5, 1]]`` and ``b = (1, 1)``.
    """

    dim = 2
    has_oracles = True

    def __init__(self, kappa=100.0):
        self.kappa = float(kappa)
        self.A = np.array([[2.0 * self.kappa, 0.5], [0.5, 1.0]])
        self.b = np.ones(2)
        self.mean_H = sym_matrix(0.5 * (np.eye(2) + self.A))

    def __repr__(self):
        return f"Quadratic2Objective(kappa={self.kappa!r})"

    def sample_gradients(self, xi, n, rng):
        xi = self._point(xi)
        t = rng.random(n)
        w = (self.A - np.eye(2)) @ xi
        return (xi - self.b) + t[:, None] * w

    def exact_gradient(self, xi):
        return self.mean_H @ self._point(xi) - self.b

    def exact_value(self, xi):
        xi = self._point(xi)
        return 0.5 * float(xi @ self.mean_H @ xi) - float(self.b @ xi)

    def exact_covariance(self, xi):
        w = (self.A - np.eye(2)) @ self._point(xi)
        return np.outer(w, w) / 12.0

    def minimizer(self):
        (a, c), (_, d) = self.mean_H
        det = a * d - c * c
        if abs(det) <= 1e-14 * max(abs(a * d), c * c, 1.0):
            raise SingularMatrix(f"E[H] is singular (det={det:.3e})")
        b1, b2 = self.b
        return np.array([(b1 * d - c * b2) / det, (a * b2 - c * b1) / det])

    def smoothness(self):
        lo, hi = eig_extremes(self.mean_H)
        return hi, lo


def make_objective(name, kappa=100.0, noise_std=None):
    """Build a built-in objective by name (``quad3`` or ``quad2``)."""
    if name == "quad3":
        return Quadratic3Objective() if noise_std is None else Quadratic3Objective(noise_std)
    if name == "quad2":
        return Quadratic2Objective(kappa)
    raise ValueError(f"unknown objective {name!r}")

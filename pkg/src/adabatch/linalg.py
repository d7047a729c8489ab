"""Small dense linear algebra for gradient error decompositions.

Vectors are 1-D float64 arrays and symmetric matrices are full square
float64 arrays. Everything here is pure; inputs are never modified.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConvergenceFailure, DegenerateGradient, DimensionMismatch

GRAD_FLOOR_SCALE = 1e-12
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
MAX_DENSE_DIM = 16


def as_vector(v):
    """Return `v` as a finite 1-D float64 array."""
    out = np.array(v, dtype=np.float64)
    if out.ndim != 1 or out.size == 0:
        raise DimensionMismatch(f"expected a non-empty vector, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError("vector has non-finite entries")
    return out


def sym_matrix(m):
    """Return `m` as a finite symmetric float64 matrix, symmetrized as (M + M^T)/2."""
    out = np.array(m, dtype=np.float64)
    if out.ndim != 2 or out.shape[0] != out.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError("matrix has non-finite entries")
    return 0.5 * (out + out.T)


def grad_floor(xi=None):
    """Smallest gradient norm for which the batch tests are defined at `xi`."""
    if xi is None:
        return GRAD_FLOOR_SCALE
    return GRAD_FLOOR_SCALE * max(1.0, float(np.linalg.norm(xi)))


def _check_gradient(g, floor):
    norm = float(np.linalg.norm(g))
    if not norm > (GRAD_FLOOR_SCALE if floor is None else floor):
        raise DegenerateGradient(f"gradient norm {norm:.3e} is below the floor")
    return norm


def unit_direction(g, floor=None):
    """Normalize `g`; raises DegenerateGradient when ``|g| <= floor``."""
    g = as_vector(g)
    return g / _check_gradient(g, floor)


@dataclass(frozen=True)
class ErrorSplit:
    """Split of an estimator error into parts along and across the gradient.

    ``parallel + orthogonal == upsilon - grad`` and ``orthogonal . grad == 0``.
    """

    parallel: np.ndarray
    orthogonal: np.ndarray
    gamma: float


def error_split(upsilon, grad_exact, floor=None):
    upsilon = as_vector(upsilon)
    grad_exact = as_vector(grad_exact)
    if upsilon.shape != grad_exact.shape:
        raise DimensionMismatch(f"{upsilon.shape} vs {grad_exact.shape}")
    norm = _check_gradient(grad_exact, floor)
    gamma = float(upsilon @ grad_exact) / norm**2 - 1.0
    e = grad_exact / norm
    orthogonal = upsilon - (upsilon @ e) * e
    return ErrorSplit(parallel=gamma * grad_exact, orthogonal=orthogonal, gamma=gamma)


@dataclass(frozen=True)
class ProjectorPair:
    p_nabla: np.ndarray
    p_perp: np.ndarray
    direction: np.ndarray


def projectors(g, floor=None):
    """Rank-one projector onto span(g) and its orthogonal complement."""
    e = unit_direction(g, floor)
    p_nabla = np.outer(e, e)
    p_perp = np.eye(e.size) - p_nabla
    return ProjectorPair(p_nabla=p_nabla, p_perp=p_perp, direction=e)


def contract(sigma, p):
    """Frobenius double contraction ``sum_ij sigma_ij p_ij``."""
    sigma = np.asarray(sigma, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if sigma.shape != p.shape or sigma.ndim != 2:
        raise DimensionMismatch(f"{sigma.shape} vs {p.shape}")
    return float(np.sum(sigma * p))


def _eig2(m):
    a, b, d = m[0, 0], m[0, 1], m[1, 1]
    mid = 0.5 * (a + d)
    rad = math.hypot(0.5 * (a - d), b)
    return mid - rad, mid + rad


def jacobi_eigenvalues(m, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm falls below
    ``tol * |m|_F``. Returns the eigenvalues in ascending order.
    """
    a = sym_matrix(m)
    n = a.shape[0]
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n)
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a[offdiag]))
        if off <= tol * scale:
            return np.sort(np.diag(a))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with the rotation acting on rows/cols p and q
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
    raise ConvergenceFailure(f"Jacobi did not converge in {max_sweeps} sweeps")


def eig_extremes(m):
    """Return ``(lambda_min, lambda_max)`` of a small symmetric matrix."""
    m = sym_matrix(m)
    n = m.shape[0]
    if n > MAX_DENSE_DIM:
        raise DimensionMismatch(f"dimension {n} exceeds the dense limit {MAX_DENSE_DIM}")
    if n == 1:
        return float(m[0, 0]), float(m[0, 0])
    if n == 2:
        lo, hi = _eig2(m)
        return float(lo), float(hi)
    eig = jacobi_eigenvalues(m)
    return float(eig[0]), float(eig[-1])

"""Batch benchmark allocations: equal weights, minimum variance, mean variance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateCovarianceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class RegularizedCovariance:
    matrix: np.ndarray
    vartheta: float


def naive_weights(d: int) -> np.ndarray:
    if d < 1:
        raise ValueError("need at least one asset")
    return np.full(d, 1.0 / d)


def regularized_covariance(X) -> RegularizedCovariance:
    """Sample covariance shrunk towards the identity by its own trace."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 2:
        raise ValueError("need at least two observations")
    S = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    vartheta = float(np.trace(S))
    if vartheta <= 0:
        raise DegenerateCovarianceError("degenerate covariance: zero trace")
    return RegularizedCovariance(S + vartheta * np.eye(S.shape[0]), vartheta)


def _solve(cov: RegularizedCovariance, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(cov.matrix, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateCovarianceError(f"covariance solve failed: {exc}") from None


def min_var_weights(cov: RegularizedCovariance) -> np.ndarray:
    ones = np.ones(cov.matrix.shape[0])
    w = _solve(cov, ones)
    return w / w.sum()


def mean_var_weights(mu, cov: RegularizedCovariance) -> np.ndarray:
    """Maximizer of ``b'mu - b'Cb/2`` subject to ``b'1 = 1``."""
    mu = np.asarray(mu, dtype=float)
    ones = np.ones(mu.size)
    # one factorization for both right-hand sides
    sol = _solve(cov, np.column_stack([mu, ones]))
    c_mu, c_one = sol[:, 0], sol[:, 1]
    eta = (1.0 - c_mu.sum()) / c_one.sum()
    w = c_mu + eta * c_one
    # the Lagrange solution sums to one up to rounding; renormalize exactly
    return w / w.sum()


def batch_mean_variance(X) -> np.ndarray:
    """Full re-estimation of M-VAR weights from a returns panel."""
    X = np.asarray(X, dtype=float)
    return mean_var_weights(X.mean(axis=0), regularized_covariance(X))

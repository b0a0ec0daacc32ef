"""Truncated-SVD denoising of the returns window."""
from __future__ import annotations

import numpy as np


def _check(X: np.ndarray, rank: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix has non-finite entries")
    if not 1 <= rank < min(X.shape):
        raise ValueError(f"rank {rank} invalid for a {X.shape[0]}x{X.shape[1]} matrix")
    return X


def truncated_svd(X, rank: int) -> np.ndarray:
    """Best Frobenius-norm approximation of ``X`` with rank at most ``rank``.

    Singular values come back in descending order, so ties at the cut keep
    the leading ``rank`` components of the decomposition.
    """
    X = _check(X, rank)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    return (U[:, :rank] * s[:rank]) @ Vt[:rank]


def denoised_latest(X, rank: int) -> np.ndarray:
    """Last row of the rank-``rank`` approximation of ``X``."""
    X = _check(X, rank)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    return (U[-1, :rank] * s[:rank]) @ Vt[:rank]

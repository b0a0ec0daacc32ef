"""Robust exponentially weighted recursive least squares (R-EWRLS)."""
from __future__ import annotations

import logging
import math

import numpy as np

from .denoise import denoised_latest
from .robustscale import MAD_CONSISTENCY, SIGMA_FLOOR, ScaleState
from .windowing import ReturnsWindow

log = logging.getLogger(__name__)


class DegeneratePortfolioError(ArithmeticError):
    """Raw coefficients sum to (almost) zero and cannot be normalized."""


class DivergenceError(ArithmeticError):
    pass


def q_weight(x: float) -> float:
    """Down-weight ``rho'(x)/x`` for ``rho = log cosh``, i.e. ``tanh(x)/x``."""
    if not math.isfinite(x):
        raise ValueError("q_weight requires a finite argument")
    if abs(x) < 1e-12:
        return 1.0
    return math.tanh(x) / x


def huber_weight(x: float, k: float = 1.345) -> float:
    if not math.isfinite(x):
        raise ValueError("huber_weight requires a finite argument")
    ax = abs(x)
    return 1.0 if ax <= k else k / ax


def unit_weight(x: float) -> float:
    """Plain least squares: every observation at full weight."""
    return 1.0


LOSSES = {"logcosh": q_weight, "huber": huber_weight, "ls": unit_weight}


def standardize(x, sigma) -> tuple[np.ndarray, float]:
    """Scale each asset by its robust scale; also return the sum of inverse scales."""
    inv = 1.0 / np.asarray(sigma, dtype=float)
    return np.asarray(x, dtype=float) * inv, float(inv.sum())


def residual(x_tilde, sigma_bar: float, beta) -> float:
    """Standardized residual ``sum_j (1 - x_j b_j) / s_j`` written as ``sigma_bar - x~'b``."""
    x_tilde = np.asarray(x_tilde, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if x_tilde.shape != beta.shape:
        raise ValueError("dimension mismatch")
    return float(sigma_bar - x_tilde @ beta)


def emit_weights(beta_raw) -> np.ndarray:
    beta_raw = np.asarray(beta_raw, dtype=float)
    total = beta_raw.sum()
    if abs(total) < 1e-10:
        raise DegeneratePortfolioError("degenerate portfolio: coefficients sum to zero")
    return beta_raw / total


class Rewrls:
    """R-EWRLS state machine: one constant-cost update per observation.

    Parameters
    ----------
    d : number of assets.
    lam : forgetting factor of the recursion.
    rank : truncation rank for denoising the latest observation; ``None``
        feeds raw returns.
    window : rows kept for denoising.
    V, nu : median window and forgetting factor of the robust scale.
    loss : ``"logcosh"`` (default), ``"huber"`` or ``"ls"`` (q = 1).
    fixed_scale : bypass robust scale estimation with these per-asset scales.
    eps : ``P`` starts at ``I / eps``.
    """

    def __init__(self, d, lam=0.8, rank=None, window=250, V=20, nu=0.99,
                 loss="logcosh", fixed_scale=None, eps=1e-2,
                 c=MAD_CONSISTENCY, sigma_floor=SIGMA_FLOOR, max_beta=1e6):
        if not 0.0 < lam <= 1.0:
            raise ValueError("lambda must lie in (0, 1]")
        if rank is not None and not 1 <= rank < d:
            raise ValueError(f"rank must satisfy 1 <= rank < d={d}")
        if loss not in LOSSES:
            raise ValueError(f"unknown loss {loss!r}")
        self.d, self.lam, self.rank, self.eps = d, lam, rank, eps
        self.weight_fn = LOSSES[loss]
        self.max_beta = max_beta
        self.window = ReturnsWindow(window, d)
        self.scale = None if fixed_scale is not None else ScaleState(d, V, nu, c, sigma_floor)
        self.fixed_scale = None if fixed_scale is None else np.broadcast_to(
            np.asarray(fixed_scale, dtype=float), (d,)).copy()
        self.resets = 0
        self.n = 0
        self.last_q = None
        self.last_x_tilde = None
        self.reset()

    def reset(self):
        self.P = np.eye(self.d) / self.eps
        self.beta_raw = np.ones(self.d)

    @property
    def sigma(self) -> np.ndarray | None:
        if self.fixed_scale is not None:
            return self.fixed_scale
        return self.scale.sigma_hat if self.scale.ready else None

    def _regressor(self, x) -> np.ndarray:
        if self.rank is not None and len(self.window) > self.rank:
            return denoised_latest(self.window.rows, self.rank)
        return x

    def update(self, x) -> "Rewrls":
        x = np.asarray(x, dtype=float)
        self.window.push(x)
        self.n += 1
        if self.scale is not None:
            self.scale.update(x)
        sigma = self.sigma
        if sigma is None:
            return self
        x_tilde, sigma_bar = standardize(self._regressor(x), sigma)
        try:
            self._step(x_tilde, sigma_bar)
        except DivergenceError as exc:
            log.warning("R-EWRLS reset at step %d: %s", self.n, exc)
            self.resets += 1
            self.reset()
        return self

    def _step(self, x_tilde: np.ndarray, sigma_bar: float):
        lam, P, beta = self.lam, self.P, self.beta_raw
        q = self.weight_fn(residual(x_tilde, sigma_bar, beta))
        Px = P @ x_tilde
        gain = q * Px / (lam + q * (x_tilde @ Px))
        P_new = (P - np.outer(gain, Px)) / lam
        P_new = 0.5 * (P_new + P_new.T)
        beta_new = beta + q * sigma_bar * (P_new @ x_tilde) - gain * (x_tilde @ beta)
        if not (np.all(np.isfinite(beta_new)) and np.all(np.isfinite(P_new))):
            raise DivergenceError("non-finite state")
        if np.max(np.abs(beta_new)) > self.max_beta:
            raise DivergenceError("coefficient magnitude above limit")
        self.P, self.beta_raw = P_new, beta_new
        self.last_q, self.last_x_tilde = q, x_tilde

    def weights(self) -> np.ndarray:
        return emit_weights(self.beta_raw)

"""Online minimum-variance (O-VAR) allocation with Tikhonov regularization.

Weights are ``(M + delta I)^{-1} 1`` normalized to sum to one, where ``M`` is
the exponentially weighted second moment of the sliding window.  ``M`` is
held as an eigen-decomposition so the regularized inverse is diagonal; each
new observation moves it by a scaling and two rank-one modifications.
"""
from __future__ import annotations

import logging

import numpy as np

from .eigenupdate import EigenDecomp, EigenUpdateError, eigen_rank_one_update
from .windowing import ReturnsWindow, decay_exponents, weighted_second_moment

log = logging.getLogger(__name__)


class SingularMomentError(ArithmeticError):
    pass


def ovar_weights(decomp: EigenDecomp, delta: float) -> np.ndarray:
    """Normalized ``Q (Pi + delta)^{-1} Q' 1``."""
    diag = decomp.Pi + delta
    if np.min(diag) < 1e-12:
        raise SingularMomentError("singular regularized moment")
    w = decomp.Q @ (decomp.Q.T.sum(axis=1) / diag)
    return w / w.sum()


def dense_ovar_weights(M, delta: float) -> np.ndarray:
    """Same weights by a direct dense solve; used as a cross-check."""
    d = M.shape[0]
    w = np.linalg.solve(M + delta * np.eye(d), np.ones(d))
    return w / w.sum()


def delta_grid(trace: float, d: int, G: int) -> np.ndarray:
    """``G`` equally spaced regularizers from ``trace / d`` to ``trace``."""
    if trace <= 0:
        raise ValueError("trace must be positive")
    if G < 2:
        raise ValueError("grid needs at least two points")
    return np.linspace(trace / d, trace, G)


def simulate_grid_returns(grid, returns, lam: float, W: int) -> np.ndarray:
    """Cumulative portfolio return of daily-rebalanced O-VAR for each grid value.

    Weights computed from the window ending at day ``n`` earn day ``n + 1``.
    One eigen-decomposition per day serves the whole grid.
    """
    grid = np.asarray(grid, dtype=float)
    X = np.asarray(returns, dtype=float)
    T, d = X.shape
    if T <= W:
        raise ValueError(f"need more than {W} training rows, got {T}")
    w = lam ** decay_exponents(W)
    total = np.zeros(grid.size)
    for n in range(W - 1, T - 1):
        rows = X[n - W + 1:n + 1]
        M = (rows * w[:, None]).T @ rows
        Pi, Q = np.linalg.eigh(0.5 * (M + M.T))
        # columns: unnormalized weights for each grid value
        B = Q @ (Q.sum(axis=0)[:, None] / (Pi[:, None] + grid[None, :]))
        B /= B.sum(axis=0)
        total += X[n + 1] @ B
    return total


def select_delta(grid, training_returns, lam: float, W: int) -> float:
    """Grid value with the largest training-period return; ties go to the smaller value."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    X = getattr(training_returns, "returns", training_returns)
    total = simulate_grid_returns(grid, X, lam, W)
    best = total.max()
    candidates = grid[total == best]
    return float(candidates.min())


def lambda_gradient_sign(rows, beta, lam: float) -> float:
    """Sign of d/dlam of ``sum_k (1 - lam**p_k s_k)^2`` with ``s = rows @ beta``."""
    s = np.asarray(rows, dtype=float) @ np.asarray(beta, dtype=float)
    p = decay_exponents(s.size)
    lp = lam**p
    # p * lam**(p - 1) without dividing by lam
    dlp = np.where(p > 0, p * lam ** np.maximum(p - 1, 0), 0.0)
    return float(np.sign(-2.0 * np.sum((1.0 - lp * s) * dlp * s)))


def lambda_update(lam_prev: float, m: int, l: int, path=None, signs=None) -> float:
    """Stochastic-approximation step for the forgetting factor at rebalance ``m``.

    ``path`` holds the last ``l`` (window rows, weights) pairs; alternatively
    the per-step gradient signs can be given directly.  A candidate outside
    ``(0, 1)`` leaves the factor unchanged.
    """
    if l < 1:
        raise ValueError("l must be at least 1")
    if signs is None:
        signs = [lambda_gradient_sign(rows, beta, lam_prev) for rows, beta in path]
    candidate = lam_prev + float(np.sum(signs)) / (m * l)
    return candidate if 0.0 < candidate < 1.0 else lam_prev


class Ovar:
    """O-VAR state machine.

    Parameters
    ----------
    d : number of assets.
    W : sliding window length.
    lam : initial forgetting factor.
    G : size of the regularizer grid.
    delta : fixed regularizer; disables grid selection.
    adapt_lambda : update the forgetting factor at each rebalance.
    recompute_every : full re-decomposition after this many recursive updates.
    """

    def __init__(self, d, W=250, lam=0.05, G=100, delta=None, adapt_lambda=True,
                 recompute_every=1000, check_updates=True):
        if not 0.0 < lam < 1.0:
            raise ValueError("lambda must lie in (0, 1)")
        self.d, self.W, self.G = d, W, G
        self.lam = lam
        self.window = ReturnsWindow(W, d)
        self.decomp = EigenDecomp(np.eye(d), np.zeros(d))
        self.fixed_delta = delta
        self.delta = delta
        self.grid = None
        self.adapt_lambda = adapt_lambda
        self.recompute_every = recompute_every
        self.check_updates = check_updates
        self.training = None
        self.m = 0
        self.fallbacks = 0
        self._since_recompute = 0
        self._signs: list[float] = []
        self._weights = None

    # -- decomposition maintenance -------------------------------------
    def recompute(self):
        self.decomp = EigenDecomp.of(weighted_second_moment(self.window, self.lam))
        self._since_recompute = 0

    def _modify(self, decomp, xi, sign):
        return eigen_rank_one_update(decomp, xi, sign, check=self.check_updates)

    def _advance(self, x):
        evicted = self.window.push(x)
        try:
            dec = self.decomp.scaled(self.lam)
            if evicted is not None:
                dec = self._modify(dec, self.lam ** (self.W / 2) * evicted, -1)
            self.decomp = self._modify(dec, x, +1)
            self._since_recompute += 1
        except EigenUpdateError as exc:
            log.info("eigen-update fallback at n=%d: %s", self.window.n, exc)
            self.fallbacks += 1
            self.recompute()
        if self._since_recompute >= self.recompute_every:
            self.recompute()

    # -- public protocol -----------------------------------------------
    def warm_start(self, rows) -> "Ovar":
        """Load rows into the window and decompose once, skipping per-row updates."""
        for x in np.asarray(rows, dtype=float):
            self.window.push(x)
        self.recompute()
        self._weights = None
        return self

    def step(self, x) -> "Ovar":
        x = np.asarray(x, dtype=float)
        self._advance(x)
        self._weights = None
        if self.delta is not None and self.window.full:
            beta = self.weights()
            if self.adapt_lambda:
                self._signs.append(lambda_gradient_sign(self.window.rows, beta, self.lam))
        return self

    def weights(self) -> np.ndarray:
        if self._weights is None:
            if self.delta is None:
                raise RuntimeError("regularizer not set; call finish_training first")
            self._weights = ovar_weights(self.decomp, self.delta)
        return self._weights

    def finish_training(self, training_returns):
        """Freeze the regularizer grid from the training data and pick the initial value."""
        X = np.asarray(getattr(training_returns, "returns", training_returns), dtype=float)
        self.training = X
        self._signs = []
        if self.fixed_delta is not None:
            return self
        M = weighted_second_moment(X[-self.W:], self.lam)
        self.grid = delta_grid(float(np.trace(M)), self.d, self.G)
        self.delta = select_delta(self.grid, X, self.lam, self.W)
        self._weights = None
        return self

    def rebalance(self):
        """Adapt lambda and delta, then rebuild the decomposition from scratch."""
        self.m += 1
        if self.adapt_lambda and self._signs:
            self.lam = lambda_update(self.lam, self.m, len(self._signs), signs=self._signs)
        self._signs = []
        if self.grid is not None and self.training is not None:
            self.delta = select_delta(self.grid, self.training, self.lam, self.W)
        self.recompute()
        self._weights = None
        return self

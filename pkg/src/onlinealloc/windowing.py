"""Sliding returns window and its exponentially weighted second moment.

Weight convention: in a window holding ``m`` rows the newest row carries
weight ``lam**0`` and the oldest ``lam**(m - 1)``.
"""
from __future__ import annotations

import numpy as np


class ReturnsWindow:
    """Fixed-capacity window over the ``capacity`` most recent d-vectors."""

    def __init__(self, capacity: int, d: int):
        if capacity < 1:
            raise ValueError("window capacity must be positive")
        if d < 1:
            raise ValueError("dimension must be positive")
        self.capacity = int(capacity)
        self.d = int(d)
        self.n = 0
        self._buf = np.zeros((self.capacity, self.d))
        self._start = 0
        self._count = 0

    def __len__(self) -> int:
        return self._count

    @property
    def full(self) -> bool:
        return self._count == self.capacity

    def push(self, x) -> np.ndarray | None:
        """Append ``x``; return the evicted row when the window was full."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"expected a vector of dimension {self.d}, got shape {x.shape}")
        evicted = None
        if self._count < self.capacity:
            self._buf[(self._start + self._count) % self.capacity] = x
            self._count += 1
        else:
            evicted = self._buf[self._start].copy()
            self._buf[self._start] = x
            self._start = (self._start + 1) % self.capacity
        self.n += 1
        return evicted

    @property
    def rows(self) -> np.ndarray:
        """Rows in arrival order, oldest first (a copy)."""
        idx = (self._start + np.arange(self._count)) % self.capacity
        return self._buf[idx]

    @property
    def oldest(self) -> np.ndarray:
        if not self._count:
            raise IndexError("window is empty")
        return self._buf[self._start].copy()

    @property
    def latest(self) -> np.ndarray:
        if not self._count:
            raise IndexError("window is empty")
        return self._buf[(self._start + self._count - 1) % self.capacity].copy()

    def copy(self) -> "ReturnsWindow":
        other = ReturnsWindow(self.capacity, self.d)
        other._buf = self._buf.copy()
        other._start, other._count, other.n = self._start, self._count, self.n
        return other


def decay_exponents(m: int) -> np.ndarray:
    """Exponent of ``lam`` for each of ``m`` rows, oldest first."""
    return np.arange(m - 1, -1, -1, dtype=float)


def weighted_second_moment(rows, lam: float) -> np.ndarray:
    """``sum_k lam**p_k x_k x_k'`` over the window rows (oldest first)."""
    X = rows.rows if isinstance(rows, ReturnsWindow) else np.atleast_2d(np.asarray(rows, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("empty window")
    if not 0.0 < lam <= 1.0:
        raise ValueError("lambda must lie in (0, 1]")
    w = lam ** decay_exponents(X.shape[0])
    M = (X * w[:, None]).T @ X
    return 0.5 * (M + M.T)


def rank_two_update(M, evicted, incoming, lam: float, W: int) -> np.ndarray:
    """Slide a full ``W``-row moment by one observation.

    The new moment is ``lam*M - lam**W * e e' + x x'`` where ``e`` is the
    evicted row and ``x`` the incoming one; every surviving row ages by one
    power of ``lam``.
    """
    if lam == 0:
        raise ValueError("lambda must be non-zero")
    if not 0.0 < lam <= 1.0:
        raise ValueError("lambda must lie in (0, 1]")
    e = np.asarray(evicted, dtype=float)
    x = np.asarray(incoming, dtype=float)
    out = lam * np.asarray(M, dtype=float) - lam**W * np.outer(e, e) + np.outer(x, x)
    return 0.5 * (out + out.T)


class RecursiveMoment:
    """Weighted second moment of a sliding window, maintained recursively.

    The moment is rebuilt from the window every ``recompute_every`` rank-two
    updates to bound floating-point drift.
    """

    def __init__(self, capacity: int, d: int, lam: float, recompute_every: int = 1000):
        if not 0.0 < lam <= 1.0:
            raise ValueError("lambda must lie in (0, 1]")
        self.window = ReturnsWindow(capacity, d)
        self.lam = lam
        self.recompute_every = recompute_every
        self.matrix = np.zeros((d, d))
        self._since_recompute = 0

    def push(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        evicted = self.window.push(x)
        if evicted is None:
            # warm-up: age existing rows and add the newcomer at weight 1
            self.matrix = self.lam * self.matrix + np.outer(x, x)
        else:
            self.matrix = rank_two_update(self.matrix, evicted, x, self.lam, self.window.capacity)
            self._since_recompute += 1
            if self._since_recompute >= self.recompute_every:
                self.recompute()
        return self.matrix

    def recompute(self) -> np.ndarray:
        self.matrix = weighted_second_moment(self.window, self.lam)
        self._since_recompute = 0
        return self.matrix

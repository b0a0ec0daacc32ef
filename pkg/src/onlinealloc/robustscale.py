"""Robust location and scale: binned median, MAD, EWMED and EWMAD."""
from __future__ import annotations

from collections import deque

import numpy as np
from scipy.stats import norm

#: Makes MAD a consistent estimator of the normal standard deviation.
MAD_CONSISTENCY = 1.0 / norm.ppf(0.75)
SIGMA_FLOOR = 1e-8

_NBINS = 64
_SORT_CUTOFF = 32


def _select(x: np.ndarray, k: int) -> float:
    """k-th smallest entry (0-based) by successive binning."""
    while x.size > _SORT_CUTOFF:
        lo, hi = x.min(), x.max()
        if lo == hi:
            return float(lo)
        width = (hi - lo) / _NBINS
        idx = np.minimum(((x - lo) / width).astype(np.intp), _NBINS - 1)
        counts = np.bincount(idx, minlength=_NBINS)
        cum = np.cumsum(counts)
        b = int(np.searchsorted(cum, k, side="right"))
        if counts[b] == x.size:
            # bin resolution exhausted (values within a few ulps)
            break
        if b:
            k -= int(cum[b - 1])
        x = x[idx == b]
    return float(np.partition(x, k)[k]) if x.size > 1 else float(x[0])


def median(values) -> float:
    """Exact median; the even-length case averages the two middle order statistics."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("median of empty input")
    if not np.all(np.isfinite(x)):
        raise ValueError("median requires finite values")
    n = x.size
    if n % 2:
        return _select(x, n // 2)
    return 0.5 * (_select(x, n // 2 - 1) + _select(x, n // 2))


def mad(values) -> float:
    """Median absolute deviation about the median (unscaled)."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("MAD of empty input")
    return median(np.abs(x - median(x)))


def ewmed_update(mu_prev: float, window, nu: float) -> float:
    window = np.asarray(window, dtype=float)
    if window.size == 0:
        raise ValueError("empty window")
    return nu * mu_prev + (1.0 - nu) * median(window)


def ewmad_update(
    sigma_prev: float,
    window,
    mu: float,
    nu: float,
    c: float = MAD_CONSISTENCY,
    floor: float = SIGMA_FLOOR,
) -> float:
    """EWMAD step; ``mu`` must already be the current EWMED location."""
    window = np.asarray(window, dtype=float)
    if window.size == 0:
        raise ValueError("empty window")
    return max(floor, nu * sigma_prev + c * (1.0 - nu) * median(np.abs(window - mu)))


class ScaleState:
    """Per-asset EWMED location and EWMAD scale over a window of ``V`` returns.

    Nothing is estimated until ``V`` observations have arrived; the state is
    then seeded with the batch median and ``c * MAD`` of that first window and
    updated recursively afterwards.
    """

    def __init__(self, d: int, V: int = 20, nu: float = 0.99,
                 c: float = MAD_CONSISTENCY, floor: float = SIGMA_FLOOR):
        if not 0.0 < nu < 1.0:
            raise ValueError("nu must lie in (0, 1)")
        if V < 1:
            raise ValueError("median window must be positive")
        self.d, self.V, self.nu, self.c, self.floor = d, V, nu, c, floor
        self.mu_hat = np.zeros(d)
        self.sigma_hat = np.ones(d)
        self.ready = False
        self._window: deque[np.ndarray] = deque(maxlen=V)

    @property
    def window(self) -> np.ndarray:
        return np.array(self._window)

    def update(self, x) -> bool:
        """Feed one raw observation; returns whether estimates are available."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"expected dimension {self.d}")
        self._window.append(x)
        if len(self._window) < self.V:
            return False
        win = self.window
        # column medians; identical to median() on each column
        med = np.median(win, axis=0)
        if not self.ready:
            self.mu_hat = med
            self.sigma_hat = np.maximum(self.floor, self.c * np.median(np.abs(win - med), axis=0))
            self.ready = True
            return True
        self.mu_hat = self.nu * self.mu_hat + (1.0 - self.nu) * med
        dev = np.median(np.abs(win - self.mu_hat), axis=0)
        self.sigma_hat = np.maximum(self.floor, self.nu * self.sigma_hat + self.c * (1.0 - self.nu) * dev)
        return True

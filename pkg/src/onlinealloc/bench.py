"""Wall-clock comparison of one online O-VAR step against a batch M-VAR refit."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .benchmarks import batch_mean_variance
from .ovar import Ovar


@dataclass
class SpeedReport:
    rows: int
    cols: int
    online_seconds: float
    batch_seconds: float

    @property
    def ratio(self) -> float:
        return self.batch_seconds / self.online_seconds

    def lines(self) -> list[str]:
        return [
            f"panel            {self.rows} x {self.cols}",
            f"online O-VAR     {1e3 * self.online_seconds:.3f} ms/step (median)",
            f"batch M-VAR      {1e3 * self.batch_seconds:.3f} ms/refit (median)",
            f"batch / online   {self.ratio:.1f}x",
        ]


def _median_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def bench_speed(rows: int, cols: int, steps: int = 15, repeats: int = 5,
                window: int | None = None, seed: int = 0) -> SpeedReport:
    """Time both approaches on a seeded ``rows x cols`` Gaussian panel.

    The online side is warmed on the first ``window`` rows and then timed
    per step on the following ones; the batch side refits mean-variance
    weights on the whole panel.
    """
    if not rows >= cols >= 2:
        raise ValueError("need rows >= cols >= 2")
    rng = np.random.default_rng(seed)
    X = 0.01 * rng.standard_normal((rows + steps + 1, cols))
    W = window or max(2, min(250, rows // 2))
    model = Ovar(cols, W=W, lam=0.95, adapt_lambda=True)
    model.warm_start(X[:W])
    model.delta = float(model.decomp.Pi.sum()) / cols
    model.step(X[W])  # trigger JIT compilation outside the timed region

    times = []
    for x in X[W + 1:W + 1 + steps]:
        t0 = time.perf_counter()
        model.step(x)
        times.append(time.perf_counter() - t0)
    online = float(np.median(times))

    panel = X[:rows]
    batch = _median_time(lambda: batch_mean_variance(panel), repeats)
    return SpeedReport(rows, cols, online, batch)

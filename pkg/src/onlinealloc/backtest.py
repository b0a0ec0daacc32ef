"""Walk-forward evaluation: training segment, rebalancing schedule, reports."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import benchmarks
from .marketdata import ReturnsSeries
from .metrics import PerformanceReport, build_report
from .ovar import Ovar
from .rewrls import DegeneratePortfolioError, Rewrls

log = logging.getLogger(__name__)

STRATEGIES = ("NAIVE", "VAR", "MVAR", "REWRLS", "OVAR")


@dataclass(frozen=True)
class BacktestConfig:
    train_len: int = 504
    rebalance_every: int = 250
    window: int = 250
    # R-EWRLS
    lam: float = 0.8
    rank: int | None = 5
    nu: float = 0.99
    median_window: int = 20
    # O-VAR
    ovar_lambda: float = 0.05
    grid_size: int = 100
    ovar_delta: float | None = None
    adapt_lambda: bool = True
    periods_per_year: int = 250

    def __post_init__(self):
        if self.window < 1 or self.train_len < self.window:
            raise ValueError("train_len must be at least the window length")
        if self.rebalance_every < 1:
            raise ValueError("rebalance_every must be positive")


@dataclass
class BacktestResult:
    strategy: str
    report: PerformanceReport
    weight_history: list[np.ndarray]
    equity_curve: np.ndarray
    daily_returns: np.ndarray
    applied_weights: np.ndarray
    rebalance_days: list[int]
    events: list[str] = field(default_factory=list)


class InsufficientDataError(ValueError):
    pass


# -- strategy adapters ------------------------------------------------------
# Each adapter sees returns one day at a time via observe() and is asked for
# weights only at rebalance instants, using data strictly before that day.

class _Naive:
    def __init__(self, cfg, d):
        self.w = benchmarks.naive_weights(d)

    def train(self, X):
        pass

    def initial_weights(self):
        return self.w

    def observe(self, x):
        pass

    def rebalance(self):
        return self.w


class _Batch:
    def __init__(self, cfg, d, mean_variance):
        self.mean_variance = mean_variance
        self.rows: list[np.ndarray] = []

    def _estimate(self):
        X = np.asarray(self.rows)
        cov = benchmarks.regularized_covariance(X)
        if self.mean_variance:
            return benchmarks.mean_var_weights(X.mean(axis=0), cov)
        return benchmarks.min_var_weights(cov)

    def train(self, X):
        self.rows.extend(X)

    def initial_weights(self):
        return self._estimate()

    def observe(self, x):
        self.rows.append(x)

    def rebalance(self):
        # expanding window: everything up to the previous day
        return self._estimate()


class _Rewrls:
    def __init__(self, cfg, d):
        rank = cfg.rank if cfg.rank is not None and cfg.rank < d else None
        if cfg.rank is not None and rank is None:
            log.warning("rank %d not below d=%d; denoising disabled", cfg.rank, d)
        self.model = Rewrls(d, lam=cfg.lam, rank=rank, window=cfg.window,
                            V=cfg.median_window, nu=cfg.nu)
        self.d = d

    def train(self, X):
        for x in X:
            self.model.update(x)

    def initial_weights(self):
        return benchmarks.naive_weights(self.d)

    def observe(self, x):
        self.model.update(x)

    def rebalance(self):
        return self.model.weights()


class _Ovar:
    def __init__(self, cfg, d):
        self.model = Ovar(d, W=cfg.window, lam=cfg.ovar_lambda, G=cfg.grid_size,
                          delta=cfg.ovar_delta, adapt_lambda=cfg.adapt_lambda)
        self.d = d

    def train(self, X):
        for x in X:
            self.model.step(x)
        self.model.finish_training(X)

    def initial_weights(self):
        return benchmarks.naive_weights(self.d)

    def observe(self, x):
        self.model.step(x)

    def rebalance(self):
        self.model.rebalance()
        return self.model.weights()


def make_strategy(name: str, cfg: BacktestConfig, d: int):
    name = name.upper().replace("-", "")
    if name == "NAIVE":
        return _Naive(cfg, d)
    if name == "VAR":
        return _Batch(cfg, d, mean_variance=False)
    if name == "MVAR":
        return _Batch(cfg, d, mean_variance=True)
    if name == "REWRLS":
        return _Rewrls(cfg, d)
    if name == "OVAR":
        return _Ovar(cfg, d)
    raise ValueError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")


def _returns_matrix(data) -> np.ndarray:
    X = data.returns if isinstance(data, ReturnsSeries) else data
    return np.asarray(X, dtype=float)


def run_backtest(config: BacktestConfig, data, strategy: str) -> BacktestResult:
    """Walk-forward run of one strategy.

    The first ``train_len`` days only warm up the strategy.  Out of sample,
    day 0 holds no position; the initial weights are held from day 1 and
    replaced at days ``k * rebalance_every`` (k >= 1) by weights computed from
    data strictly before that day.  Online strategies still update every day.
    """
    X = _returns_matrix(data)
    T, d = X.shape
    cfg = config
    if T <= cfg.train_len + cfg.rebalance_every:
        raise InsufficientDataError(
            f"need more than {cfg.train_len + cfg.rebalance_every} observations, got {T}")
    name = strategy.upper().replace("-", "")
    strat = make_strategy(name, cfg, d)
    events: list[str] = []

    train = X[:cfg.train_len]
    strat.train(train)
    current = np.asarray(strat.initial_weights(), dtype=float)
    history = [current.copy()]
    rebalance_days = []
    oos = X[cfg.train_len:]
    N = oos.shape[0]
    applied = np.zeros((N, d))

    for i, x in enumerate(oos):
        if i > 0 and i % cfg.rebalance_every == 0:
            try:
                new = np.asarray(strat.rebalance(), dtype=float)
                if not np.all(np.isfinite(new)):
                    raise ArithmeticError("non-finite weights")
                current = new
            except (DegeneratePortfolioError, ArithmeticError) as exc:
                events.append(f"day {i}: {exc}; holding previous weights")
                log.warning("%s rebalance at day %d failed: %s", name, i, exc)
            history.append(current.copy())
            rebalance_days.append(i)
        if i > 0:
            applied[i] = current
        strat.observe(x)

    if name == "REWRLS" and strat.model.resets:
        events.append(f"{strat.model.resets} divergence resets")
    daily = np.einsum("ij,ij->i", applied[1:], oos[1:])
    report = build_report(daily, history, cfg.periods_per_year)
    return BacktestResult(name, report, history, np.cumsum(daily), daily, applied,
                          rebalance_days, events)


def _run_safe(args):
    config, X, name = args
    try:
        return run_backtest(config, X, name)
    except Exception as exc:  # a failing strategy must not sink the table
        log.error("strategy %s failed: %s", name, exc)
        return exc


def _map(func, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(func, items))
    return [func(it) for it in items]


def compare_strategies(config: BacktestConfig, data, strategies=STRATEGIES, jobs: int = 1):
    """Run each strategy on the same data and schedule.

    Returns ``{name: BacktestResult | Exception}`` in the order given.
    """
    X = _returns_matrix(data)
    names = [s.upper().replace("-", "") for s in strategies]
    results = _map(_run_safe, [(config, X, n) for n in names], jobs)
    return dict(zip(names, results))


def _sweep_cell(args):
    config, X, lam, rank = args
    res = _run_safe((replace(config, lam=lam, rank=rank), X, "REWRLS"))
    return float("nan") if isinstance(res, Exception) else res.report.sharpe


def sharpe_grid(config: BacktestConfig, data, lambdas, ranks, jobs: int = 1) -> np.ndarray:
    """R-EWRLS Sharpe ratio over a forgetting-factor by rank grid (rows: lambda)."""
    X = _returns_matrix(data)
    cells = [(config, X, float(l), int(r)) for l in lambdas for r in ranks]
    values = _map(_sweep_cell, cells, jobs)
    return np.array(values, dtype=float).reshape(len(lambdas), len(ranks))

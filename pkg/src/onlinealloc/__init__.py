"""Streaming portfolio allocation: R-EWRLS and O-VAR online strategies,
batch benchmarks and a walk-forward backtest harness."""

from .backtest import BacktestConfig, compare_strategies, run_backtest, sharpe_grid
from .marketdata import PriceSeries, ReturnsSeries, load_prices, to_log_returns
from .metrics import PerformanceReport, build_report
from .ovar import Ovar
from .rewrls import Rewrls

__all__ = [
    "BacktestConfig", "Ovar", "PerformanceReport", "PriceSeries", "ReturnsSeries", "Rewrls",
    "build_report", "compare_strategies", "load_prices", "run_backtest", "sharpe_grid",
    "to_log_returns",
]
__version__ = "0.1.0"

"""Command-line driver: backtests, strategy comparison, parameter sweeps, timings."""
from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .backtest import STRATEGIES, BacktestConfig, compare_strategies, run_backtest, sharpe_grid
from .bench import bench_speed
from .marketdata import DataError, load_prices, synthetic_prices, to_log_returns
from .metrics import COLUMNS, HEADERS

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("onlinealloc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_range(text: str, integer: bool = False) -> list:
    """``start:end:count`` (evenly spaced, inclusive) or ``start:end`` for integer steps."""
    parts = text.split(":")
    try:
        if integer and len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        if len(parts) == 3:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise ValueError
            values = np.linspace(lo, hi, count)
            return [int(round(v)) for v in values] if integer else [float(v) for v in values]
        if len(parts) == 1:
            return [int(parts[0])] if integer else [float(parts[0])]
    except ValueError:
        pass
    raise UsageError(f"bad range {text!r}; expected start:end:count")


def _add_data_flags(p):
    g = p.add_argument_group("data")
    g.add_argument("--data", type=Path, help="price file: ISO date column, one column per asset")
    g.add_argument("--delimiter", default=",", help="field delimiter of --data (default ',')")
    g.add_argument("--synthetic", action="store_true",
                   help="use a seeded geometric random walk instead of --data")
    g.add_argument("--days", type=int, default=1500, help="synthetic panel length (default 1500)")
    g.add_argument("--assets", type=int, default=10, help="synthetic asset count (default 10)")
    g.add_argument("--seed", type=int, default=0, help="synthetic-data seed (default 0)")


def _add_config_flags(p):
    g = p.add_argument_group("protocol")
    g.add_argument("--rebalance", type=int, default=250, help="days between applied rebalances (default 250)")
    g.add_argument("--train", type=int, default=504, help="initial training days (default 504)")
    g.add_argument("--window", type=int, default=250, help="sliding window W (default 250)")
    g.add_argument("--annualization", type=int, default=250, help="periods per year (default 250)")
    g = p.add_argument_group("strategies")
    g.add_argument("--nu", type=float, default=0.99, help="robust scale forgetting factor (default 0.99)")
    g.add_argument("--median-window", type=int, default=20, help="robust scale window V (default 20)")
    g.add_argument("--grid-size", type=int, default=100, help="O-VAR regularizer grid size G (default 100)")
    g.add_argument("--ovar-lambda", type=float, default=0.05,
                   help="initial O-VAR forgetting factor (default 0.05)")
    g.add_argument("--ovar-delta", type=float, default=None,
                   help="fixed O-VAR regularizer (default: selected on the training grid)")


def _add_output_flags(p):
    p.add_argument("--format", choices=["table", "csv", "json", "json-like"], default="table")
    p.add_argument("--out", type=Path, help="write results here instead of standard output")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="onlinealloc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("backtest", help="walk-forward run of a single strategy")
    _add_data_flags(p)
    _add_config_flags(p)
    p.add_argument("--strategy", type=str.lower, default="ovar",
                   choices=[s.lower() for s in STRATEGIES])
    p.add_argument("--lambda", dest="lam", type=float, default=0.8, help="R-EWRLS forgetting factor (default 0.8)")
    p.add_argument("--rank", type=int, default=5, help="R-EWRLS denoising rank (default 5)")
    _add_output_flags(p)

    p = sub.add_parser("compare", help="all strategies on the same data and schedule")
    _add_data_flags(p)
    _add_config_flags(p)
    p.add_argument("--strategy", type=str.lower, action="append",
                   choices=[s.lower() for s in STRATEGIES], help="repeatable; default all five")
    p.add_argument("--lambda", dest="lam", type=float, default=0.8, help="R-EWRLS forgetting factor (default 0.8)")
    p.add_argument("--rank", type=int, default=5, help="R-EWRLS denoising rank (default 5)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes (default 1)")
    _add_output_flags(p)

    p = sub.add_parser("sweep", help="R-EWRLS Sharpe ratio over a lambda x rank grid")
    _add_data_flags(p)
    _add_config_flags(p)
    p.add_argument("--lambda", dest="lam", default="0.7:0.99:10", help="start:end:count (default 0.7:0.99:10)")
    p.add_argument("--rank", default="1:10", help="start:end or start:end:count (default 1:10)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes (default 1)")
    _add_output_flags(p)

    p = sub.add_parser("bench", help="online O-VAR step vs batch mean-variance refit")
    p.add_argument("--rows", type=int, default=1000)
    p.add_argument("--cols", type=int, default=500)
    p.add_argument("--steps", type=int, default=15, help="timed online steps (default 15)")
    p.add_argument("--out", type=Path)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load(args):
    if args.data is not None and args.synthetic:
        raise UsageError("--data and --synthetic are mutually exclusive")
    if args.synthetic:
        prices = synthetic_prices(args.days + 1, args.assets, seed=args.seed)
    elif args.data is not None:
        if not args.data.exists():
            raise DataError(f"data file not found: {args.data}")
        prices = load_prices(args.data, delimiter=args.delimiter)
    else:
        raise UsageError("one of --data or --synthetic is required")
    return to_log_returns(prices)


def _config(args, **extra) -> BacktestConfig:
    try:
        return BacktestConfig(
            train_len=args.train, rebalance_every=args.rebalance, window=args.window,
            nu=args.nu, median_window=args.median_window, ovar_lambda=args.ovar_lambda,
            grid_size=args.grid_size, ovar_delta=args.ovar_delta,
            periods_per_year=args.annualization, **extra)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _fmt(v: float) -> str:
    return "nan" if not np.isfinite(v) else f"{v:.4f}"


def render_table(rows: dict, fmt: str) -> str:
    """``rows`` maps strategy name to a PerformanceReport or an exception."""
    out = io.StringIO()
    if fmt in ("json", "json-like"):
        tree = {}
        for name, rep in rows.items():
            tree[name] = {"error": str(rep)} if isinstance(rep, Exception) else rep.as_dict()
        json.dump(tree, out, indent=2, sort_keys=False)
        out.write("\n")
        return out.getvalue()
    if fmt == "csv":
        out.write(",".join(("strategy",) + HEADERS) + "\n")
        for name, rep in rows.items():
            cells = ["failed"] * len(COLUMNS) if isinstance(rep, Exception) else [_fmt(v) for v in rep.row()]
            out.write(",".join([name, *cells]) + "\n")
        return out.getvalue()
    width = 10
    out.write(f"{'strategy':<10}" + "".join(f"{h:>{width}}" for h in HEADERS) + "\n")
    for name, rep in rows.items():
        if isinstance(rep, Exception):
            out.write(f"{name:<10}  failed: {rep}\n")
        else:
            out.write(f"{name:<10}" + "".join(f"{_fmt(v):>{width}}" for v in rep.row()) + "\n")
    return out.getvalue()


def render_matrix(lambdas, ranks, M, fmt: str) -> str:
    out = io.StringIO()
    if fmt in ("json", "json-like"):
        json.dump({"lambda": list(lambdas), "rank": list(ranks),
                   "sharpe": [[None if not np.isfinite(v) else float(v) for v in row] for row in M]},
                  out, indent=2)
        out.write("\n")
        return out.getvalue()
    sep = "," if fmt == "csv" else "\t"
    out.write(sep.join(["lambda\\rank", *(str(r) for r in ranks)]) + "\n")
    for lam, row in zip(lambdas, M):
        out.write(sep.join([f"{lam:.6g}", *(_fmt(v) for v in row)]) + "\n")
    return out.getvalue()


def _emit(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _check_length(cfg: BacktestConfig, data):
    need = cfg.train_len + cfg.rebalance_every
    if len(data) <= need:
        raise DataError(f"panel has {len(data)} return rows; the schedule needs more than {need}")


def _run(args) -> int:
    if args.command == "bench":
        rep = bench_speed(args.rows, args.cols, steps=args.steps)
        _emit("\n".join(rep.lines()) + "\n", args.out)
        return EXIT_OK

    data = _load(args)
    if args.command == "sweep":
        lambdas = parse_range(args.lam)
        ranks = parse_range(args.rank, integer=True)
        if any(not 0 < l <= 1 for l in lambdas):
            raise UsageError("lambda values must lie in (0, 1]")
        if any(not 1 <= r < data.d for r in ranks):
            raise UsageError(f"ranks must lie in [1, {data.d - 1}] for {data.d} assets")
        _check_length(_config(args), data)
        M = sharpe_grid(_config(args), data, lambdas, ranks, jobs=args.jobs)
        _emit(render_matrix(lambdas, ranks, M, args.format), args.out)
        return EXIT_OK

    cfg = _config(args, lam=args.lam, rank=args.rank)
    _check_length(cfg, data)
    if args.command == "backtest":
        res = run_backtest(cfg, data, args.strategy)
        for e in res.events:
            log.warning("%s: %s", res.strategy, e)
        _emit(render_table({res.strategy: res.report}, args.format), args.out)
        return EXIT_OK

    names = [s.upper() for s in (args.strategy or STRATEGIES)]
    results = compare_strategies(cfg, data, names, jobs=args.jobs)
    rows = {n: (r if isinstance(r, Exception) else r.report) for n, r in results.items()}
    _emit(render_table(rows, args.format), args.out)
    return EXIT_NUMERIC if all(isinstance(r, Exception) for r in results.values()) else EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return _run(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # protocol errors such as a panel too short for the schedule
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())

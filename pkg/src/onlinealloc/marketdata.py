"""Price ingestion, date alignment and log-return conversion."""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised when an input panel violates the price-series contract."""


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple[dt.date, ...]
    prices: np.ndarray
    asset_names: tuple[str, ...]

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 2:
            raise DataError("prices must be a T x d matrix")
        if prices.shape != (len(self.dates), len(self.asset_names)):
            raise DataError(
                f"shape {prices.shape} does not match "
                f"{len(self.dates)} dates x {len(self.asset_names)} assets"
            )
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            bad = int(np.argwhere(~(np.isfinite(prices) & (prices > 0)))[0, 0])
            raise DataError(f"row {bad}: non-positive price")
        for i in range(1, len(self.dates)):
            if self.dates[i] <= self.dates[i - 1]:
                raise DataError(f"row {i}: non-monotone dates")
        object.__setattr__(self, "prices", prices)

    @property
    def T(self) -> int:
        return self.prices.shape[0]

    @property
    def d(self) -> int:
        return self.prices.shape[1]


@dataclass(frozen=True)
class ReturnsSeries:
    dates: tuple[dt.date, ...]
    returns: np.ndarray
    asset_names: tuple[str, ...]

    def __post_init__(self):
        returns = np.asarray(self.returns, dtype=float)
        if returns.ndim != 2 or returns.shape[0] != len(self.dates):
            raise DataError("returns must be a (T-1) x d matrix aligned with dates")
        if not np.all(np.isfinite(returns)):
            raise DataError("returns contain non-finite entries")
        object.__setattr__(self, "returns", returns)

    def __len__(self) -> int:
        return self.returns.shape[0]

    @property
    def d(self) -> int:
        return self.returns.shape[1]


def _parse_date(text: str, row: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise DataError(f"row {row}: cannot parse date {text!r}") from None


def load_prices(source, delimiter: str = ",") -> PriceSeries:
    """Read a delimited price panel.

    The first column holds ISO-8601 dates and every other column one asset,
    with a header row of asset names.  Row indices in error messages count
    data rows from 0 (the header is not counted).
    """
    path = Path(source)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        names = tuple(h.strip() for h in header[1:])
        if not names:
            raise DataError(f"{path}: header names no asset columns")

        dates, rows, problems = [], [], []
        for i, rec in enumerate(reader):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != len(names) + 1:
                problems.append(f"row {i}: ragged row ({len(rec) - 1} values, expected {len(names)})")
                continue
            date = _parse_date(rec[0], i)
            try:
                values = [float(f) for f in rec[1:]]
            except ValueError:
                problems.append(f"row {i}: missing or non-numeric price")
                continue
            if any(not np.isfinite(v) or v <= 0 for v in values):
                problems.append(f"row {i}: non-positive price")
                continue
            if dates and date <= dates[-1]:
                problems.append(f"row {i}: non-monotone dates")
                continue
            dates.append(date)
            rows.append(values)

    if problems:
        raise DataError(f"{path}: " + "; ".join(problems))
    if not rows:
        raise DataError(f"{path}: no data rows")
    return PriceSeries(tuple(dates), np.array(rows), names)


def align(series: Sequence[PriceSeries]) -> PriceSeries:
    """Inner-join several panels on date, keeping asset columns in input order."""
    if not series:
        raise DataError("nothing to align")
    common = set(series[0].dates)
    for s in series[1:]:
        common &= set(s.dates)
    dates = tuple(sorted(common))
    if not dates:
        raise DataError("no common dates across inputs")
    blocks, names = [], []
    for s in series:
        index = {d: i for i, d in enumerate(s.dates)}
        blocks.append(s.prices[[index[d] for d in dates]])
        names.extend(s.asset_names)
    return PriceSeries(dates, np.hstack(blocks), tuple(names))


def to_log_returns(p: PriceSeries) -> ReturnsSeries:
    if p.T < 2:
        raise DataError("need at least two price rows to form returns")
    returns = np.diff(np.log(p.prices), axis=0)
    return ReturnsSeries(p.dates[1:], returns, p.asset_names)


def synthetic_prices(
    T: int,
    d: int,
    seed: int = 0,
    drift: float = 2e-4,
    vol: float = 0.01,
    start: dt.date = dt.date(2000, 1, 3),
) -> PriceSeries:
    """Seeded geometric random walk with a one-factor correlation structure."""
    rng = np.random.default_rng(seed)
    market = rng.standard_normal((T - 1, 1))
    idio = rng.standard_normal((T - 1, d))
    loadings = rng.uniform(0.3, 0.9, size=d)
    drifts = drift * rng.uniform(0.0, 2.0, size=d)
    shocks = vol * (market * loadings + idio * np.sqrt(1.0 - loadings**2))
    log_paths = np.vstack([np.zeros(d), np.cumsum(drifts + shocks, axis=0)])
    dates = tuple(start + dt.timedelta(days=i) for i in range(T))
    names = tuple(f"A{j:02d}" for j in range(d))
    return PriceSeries(dates, 100.0 * np.exp(log_paths), names)


def write_prices(p: PriceSeries, path, delimiter: str = ",") -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["date", *p.asset_names])
        for date, row in zip(p.dates, p.prices):
            w.writerow([date.isoformat(), *(repr(float(v)) for v in row)])

"""Performance criteria for a realized daily portfolio-return series."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

#: Column order of the comparison tables.
COLUMNS = ("pct_gain", "pct_loss", "mdd", "pct_wt", "turnover", "ann_return", "ann_vol", "sharpe")
HEADERS = ("%gain", "%loss", "MDD", "%WT", "TO", "Ann.R", "Ann.V", "Sharpe")


@dataclass
class PerformanceReport:
    pct_gain: float
    pct_loss: float
    mdd: float
    pct_wt: float
    turnover: float
    ann_return: float
    ann_vol: float
    sharpe: float
    flags: tuple[str, ...] = field(default=())

    def row(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in COLUMNS)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["flags"] = list(self.flags)
        return out


def max_drawdown(v) -> float:
    """Largest loss over any contiguous run of returns, as a non-negative number.

    Single pass: the worst run ending at ``t`` is the prefix sum at ``t``
    minus the largest prefix sum before it (the empty prefix counts as 0).
    """
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ValueError("max_drawdown of empty series")
    prefix = np.cumsum(v)
    peak = np.maximum.accumulate(np.concatenate(([0.0], prefix[:-1])))
    return max(0.0, -float(np.min(prefix - peak)))


def turnover(snapshots) -> tuple[float, bool]:
    """Mean L1 change between consecutive weight snapshots.

    Returns ``(value, ok)``; ``ok`` is False when fewer than two snapshots
    were supplied, in which case the value is 0.
    """
    S = [np.asarray(s, dtype=float) for s in snapshots]
    if len(S) < 2:
        return 0.0, False
    diffs = [np.abs(b - a).sum() for a, b in zip(S[:-1], S[1:])]
    return float(np.mean(diffs)), True


def build_report(daily_returns, weight_snapshots, periods_per_year: int = 250) -> PerformanceReport:
    r = np.asarray(daily_returns, dtype=float)
    if r.size == 0:
        raise ValueError("no returns to report on")
    flags = []
    pos, neg = r[r > 0], r[r < 0]
    pct_gain = 100.0 * pos.mean() if pos.size else 0.0
    pct_loss = 100.0 * neg.mean() if neg.size else 0.0
    pct_wt = 100.0 * pos.size / r.size
    mdd = max_drawdown(100.0 * r)
    to, ok = turnover(weight_snapshots)
    if not ok:
        flags.append("turnover_undefined")
    ann_return = 100.0 * r.mean() * periods_per_year
    sd = r.std(ddof=1) if r.size > 1 else 0.0
    ann_vol = 100.0 * sd * math.sqrt(periods_per_year)
    if ann_vol > 1e-12 * max(1.0, abs(ann_return)):
        sharpe = ann_return / ann_vol
    else:
        sharpe = 0.0
        flags.append("zero_variance")
    return PerformanceReport(pct_gain, pct_loss, mdd, pct_wt, to, ann_return, ann_vol, sharpe, tuple(flags))

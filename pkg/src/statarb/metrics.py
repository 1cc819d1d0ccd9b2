"""Return on capital, Sharpe, cents per share and windowed drawdown."""

from __future__ import annotations

import math

import numpy as np

TRADING_DAYS = 252
NA = "n/a"


def roc(daily_pnl, capital: float = 2.0e7) -> float:
    """Annualized return on capital, in percent."""
    pnl = np.asarray(daily_pnl, dtype=float)
    if pnl.size == 0:
        raise ValueError("empty P&L series")
    return float(pnl.mean() * TRADING_DAYS / capital * 100.0)


def sharpe(daily_pnl) -> float:
    """Annualized Sharpe ratio; NaN when the P&L has zero dispersion."""
    pnl = np.asarray(daily_pnl, dtype=float)
    if pnl.size < 2:
        raise ValueError("Sharpe needs at least 2 observations")
    sd = pnl.std(ddof=1)
    mean = pnl.mean()
    if not sd > 1e-12 * max(abs(mean), 1e-300):
        return math.nan
    return float(mean / sd * math.sqrt(TRADING_DAYS))


def cps(daily_pnl, traded_shares) -> float:
    """Total P&L in cents over total shares traded; NaN when nothing traded."""
    shares = float(np.sum(traded_shares))
    if not shares > 0:
        return math.nan
    return float(np.sum(daily_pnl) * 100.0 / shares)


def drawdown(daily_pnl, dates=None, window=None, capital: float = 2.0e7):
    """Largest peak-to-trough fall of cumulative P&L inside ``window``, in percent of capital.

    ``window`` is an inclusive ``(start, end)`` date pair matched against
    ``dates``; None means the whole series. Returns ``(percent, trough_date)``;
    the trough date is None when there is no decline.
    """
    pnl = np.asarray(daily_pnl, dtype=float)
    cum = np.cumsum(pnl)
    idx = np.arange(pnl.size)
    if window is not None:
        if dates is None:
            raise ValueError("a date window needs dates")
        d = np.asarray(dates, dtype="datetime64[D]")
        lo, hi = (np.datetime64(x, "D") for x in window)
        idx = np.flatnonzero((d >= lo) & (d <= hi))
    if idx.size == 0:
        raise ValueError("empty drawdown window")
    path = cum[idx]
    falls = np.maximum.accumulate(path) - path
    j = int(np.argmax(falls))
    if not falls[j] > 0:
        return 0.0, None
    trough = np.asarray(dates, dtype="datetime64[D]")[idx[j]] if dates is not None else int(idx[j])
    return float(falls[j] / capital * 100.0), trough


def format_metric(x) -> str:
    """Table-style rendering: at most 2 decimals, trailing zeros dropped, NaN as n/a."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return NA
    s = f"{round(float(x), 2):.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s

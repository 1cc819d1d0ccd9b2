"""Return signals and refresh-frozen historical variances.

All signals for trading day ``asof`` use data known before the open of
``asof``, except D0, which uses the open of ``asof`` itself. D0 is a
delay-0 signal: it measures pure overnight alpha, and a live strategy
could only trade it some time after the open, so real performance would be
weaker by sizable slippage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import BarPanel, window_variance

MEAN_REVERSION = "mean-reversion"
MOMENTUM = "momentum"

KINDS = ("C2C1", "C2C5", "C2C10", "C2C20", "MOM1", "D0")
VARIANCE_FLOOR = 1e-8


@dataclass(frozen=True)
class SignalVector:
    asof: np.datetime64
    kind: str
    direction: str
    tickers: tuple[str, ...]
    values: np.ndarray  # NaN where the member lacks the required history

    @property
    def sign(self) -> int:
        """-1 for mean-reversion (trade against), +1 for momentum."""
        return -1 if self.direction == MEAN_REVERSION else 1


def direction_of(kind: str) -> str:
    if kind not in KINDS:
        raise ValueError(f"unknown signal kind {kind!r}; expected one of {KINDS}")
    return MOMENTUM if kind == "MOM1" else MEAN_REVERSION


def _columns(panel: BarPanel, members) -> tuple[np.ndarray, tuple[str, ...]]:
    if members is None:
        return np.arange(panel.n_tickers), panel.tickers
    idx = getattr(members, "index", None)
    if isinstance(idx, np.ndarray):
        return idx, tuple(members.members)
    members = tuple(members)
    return panel.ticker_index(members), members


def c2c_values(panel: BarPanel, t: int, d: int, cols: np.ndarray) -> np.ndarray:
    if t < d + 1:
        return np.full(cols.size, np.nan)
    return panel.returns[t - d : t, cols].mean(axis=0)


def mom1_values(panel: BarPanel, t: int, cols: np.ndarray) -> np.ndarray:
    if t < 1:
        return np.full(cols.size, np.nan)
    return panel.close[t - 1, cols] / panel.open[t - 1, cols] - 1.0


def d0_values(panel: BarPanel, t: int, cols: np.ndarray) -> np.ndarray:
    if t < 1:
        return np.full(cols.size, np.nan)
    return panel.open[t, cols] / panel.close[t - 1, cols] - 1.0


def signal_values(panel: BarPanel, kind: str, t: int, cols: np.ndarray) -> np.ndarray:
    """Raw signal for date position ``t`` over panel columns ``cols``."""
    if kind == "MOM1":
        return mom1_values(panel, t, cols)
    if kind == "D0":
        return d0_values(panel, t, cols)
    direction_of(kind)
    return c2c_values(panel, t, int(kind[3:]), cols)


def c2c_signal(panel: BarPanel, asof, d: int, members=None) -> SignalVector:
    """Arithmetic mean of the ``d`` latest daily close-to-close returns ending at the previous close."""
    cols, tickers = _columns(panel, members)
    t = panel.date_index(asof)
    return SignalVector(np.datetime64(asof, "D"), f"C2C{d}", MEAN_REVERSION, tickers, c2c_values(panel, t, d, cols))


def mom1_signal(panel: BarPanel, asof, members=None) -> SignalVector:
    """Previous day's open-to-close return, traded with the move."""
    cols, tickers = _columns(panel, members)
    t = panel.date_index(asof)
    return SignalVector(np.datetime64(asof, "D"), "MOM1", MOMENTUM, tickers, mom1_values(panel, t, cols))


def d0_signal(panel: BarPanel, asof, members=None) -> SignalVector:
    """Overnight return from the previous close to today's open."""
    cols, tickers = _columns(panel, members)
    t = panel.date_index(asof)
    return SignalVector(np.datetime64(asof, "D"), "D0", MEAN_REVERSION, tickers, d0_values(panel, t, cols))


def compute_signal(panel: BarPanel, kind: str, asof, members=None) -> SignalVector:
    cols, tickers = _columns(panel, members)
    t = panel.date_index(asof)
    return SignalVector(np.datetime64(asof, "D"), kind, direction_of(kind), tickers, signal_values(panel, kind, t, cols))


def historical_variance(panel: BarPanel, asof, lookback: int = 21, members=None) -> np.ndarray:
    """Sample variance of the last ``lookback`` close-to-close returns, floored at 1e-8."""
    cols, _ = _columns(panel, members)
    var = window_variance(panel, asof, lookback)[cols]
    return floor_variance(var)


def floor_variance(var: Sequence[float]) -> np.ndarray:
    var = np.asarray(var, dtype=float)
    return np.where(np.isnan(var), np.nan, np.maximum(var, VARIANCE_FLOOR))

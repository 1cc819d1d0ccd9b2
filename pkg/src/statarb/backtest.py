"""Intraday backtest loop: establish at the open, liquidate at the close.

Universe, variances, classification, risk model and cost calibration are
rebuilt on each 21-day refresh from data strictly before the refresh date
and frozen until the next one. P&L is never reinvested; the gross target is
the same every day.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from .classify import Classification, DummyMatrix, build_statistical_classification, dummy_matrix
from .construct import OptimizerConfig, optimize_portfolio, regression_portfolio, weighted_regression_residuals
from .costs import CostModel, calibrate, trade_cost
from .data import BarPanel, Universe, backtest_window, select_universe
from .riskmodel import RiskModel, build_risk_model
from .signals import KINDS, direction_of, floor_variance, signal_values

logger = logging.getLogger(__name__)

CLASSIFICATIONS = ("SIC", "STAT")
CONSTRUCTORS = ("REG", "OPT")
# row order of the summary table
REPORT_RETURN_ORDER = ("D0", "MOM1", "C2C1", "C2C5", "C2C10", "C2C20")
# panel order of the cumulative P&L figures, left-to-right then top-to-bottom
FIGURE_RETURN_ORDER = ("C2C20", "C2C10", "C2C5", "C2C1", "MOM1", "D0")
REPORT_BLOCKS = (("SIC", "REG"), ("SIC", "OPT"), ("STAT", "OPT"))


@dataclass(frozen=True)
class StrategySpec:
    ret: str
    classification: str = "SIC"
    constructor: str = "REG"
    costs: bool = False

    def __post_init__(self):
        direction_of(self.ret)
        if self.classification not in CLASSIFICATIONS:
            raise ValueError(f"classification must be one of {CLASSIFICATIONS}")
        if self.constructor not in CONSTRUCTORS:
            raise ValueError(f"constructor must be one of {CONSTRUCTORS}")

    @property
    def label(self) -> str:
        return f"{self.ret}_{self.classification}_{self.constructor}_{'Y' if self.costs else 'N'}"

    def row(self) -> list[str]:
        return [self.ret, self.classification, self.constructor, "Y" if self.costs else "N"]

    @classmethod
    def parse(cls, text: str) -> "StrategySpec":
        """Inverse of :attr:`label`, e.g. ``C2C1_SIC_REG_N``."""
        parts = text.strip().replace("/", "_").split("_")
        if len(parts) != 4 or parts[3] not in ("Y", "N"):
            raise ValueError(f"bad strategy label {text!r}; expected RET_CLASS_CONS_Y|N")
        return cls(parts[0], parts[1], parts[2], parts[3] == "Y")


def strategy_grid() -> list[StrategySpec]:
    """The 36 strategy cells in summary-table row order."""
    return [
        StrategySpec(ret, cls, cons, costs)
        for cls, cons in REPORT_BLOCKS
        for ret in REPORT_RETURN_ORDER
        for costs in (False, True)
    ]


@dataclass(frozen=True)
class BacktestParams:
    universe_size: int = 2000
    lookback: int = 21
    backtest_days: int = 252
    period: int = 21
    gross: float = 2.0e7
    bound_fraction: float = 0.01
    stat_levels: tuple[int, ...] = (100, 30, 10)
    kmeans_restarts: int = 10
    seed: int = 0
    cost_linear: float = 5e-4
    cost_target: float = 1e-3
    specific_floor: float = 0.05
    end: str | None = None  # last backtest date; default: end of panel


@dataclass(frozen=True)
class RefreshState:
    date: np.datetime64
    universe: Universe
    sigma2: np.ndarray  # floored
    bounds: np.ndarray
    dummy: DummyMatrix
    cost_model: CostModel
    classification: Classification
    history: np.ndarray  # member x lookback returns before the refresh date
    risk: list = field(default_factory=list, compare=False)  # lazily built RiskModel

    def risk_model(self, floor: float) -> RiskModel:
        if not self.risk:
            self.risk.append(build_risk_model(self.history, self.dummy, self.sigma2, floor))
        return self.risk[0]


@dataclass
class BacktestResult:
    spec: StrategySpec
    dates: np.ndarray
    daily_pnl: np.ndarray
    gross_pnl: np.ndarray  # before costs
    costs: np.ndarray  # estimated costs of the day's trades (charged only if spec.costs)
    traded_dollars: np.ndarray
    traded_shares: np.ndarray
    n_names: np.ndarray
    capital: float = 2.0e7
    nonconverged_days: int = 0

    def summary(self, window=None) -> dict:
        """ROC %, Sharpe, CPS (cents) and drawdown % over ``window`` (None: whole run)."""
        dd, trough = metrics.drawdown(self.daily_pnl, self.dates, window, self.capital)
        return {
            "ROC": metrics.roc(self.daily_pnl, self.capital),
            "Sharpe": metrics.sharpe(self.daily_pnl),
            "CPC": metrics.cps(self.daily_pnl, self.traded_shares),
            "Drawdown": dd,
            "Trough": trough,
        }

    def window_mask(self, window) -> np.ndarray:
        lo, hi = (np.datetime64(x, "D") for x in window)
        return (self.dates >= lo) & (self.dates <= hi)


class Backtester:
    """Runs strategy cells over one panel, sharing refresh-frozen state between them."""

    def __init__(self, panel: BarPanel, params: BacktestParams | None = None, fundamental: Classification | None = None):
        self.panel = panel
        self.params = params or BacktestParams()
        self.fundamental = fundamental
        p = self.params
        self.window = backtest_window(panel.calendar, p.backtest_days, p.end)
        self.refresh_dates = list(self.window[:: p.period])
        self._universes: dict = {}
        self._states: dict = {}

    @property
    def pnl_dates(self) -> np.ndarray:
        # first backtest day only seeds the prior-day signals
        return self.window[1:]

    def universe(self, r: int) -> Universe:
        if r not in self._universes:
            p = self.params
            self._universes[r] = select_universe(self.panel, self.refresh_dates[r], p.universe_size, p.lookback)
        return self._universes[r]

    def state(self, r: int, classification: str) -> RefreshState:
        key = (r, classification)
        if key in self._states:
            return self._states[key]
        p = self.params
        uni = self.universe(r)
        t = self.panel.date_index(self.refresh_dates[r])
        history = self.panel.returns[t - p.lookback : t, uni.index].T
        if classification == "SIC":
            if self.fundamental is None:
                raise ValueError("SIC strategies need a fundamental classification")
            cls = self.fundamental
        else:
            cls = build_statistical_classification(
                history, uni.members, p.stat_levels, seed=p.seed, n_restarts=p.kmeans_restarts
            )
        sigma2 = floor_variance(uni.sigma2)
        st = RefreshState(
            date=self.refresh_dates[r],
            universe=uni,
            sigma2=sigma2,
            bounds=p.bound_fraction * uni.addv,
            dummy=dummy_matrix(cls, 0, uni),
            cost_model=calibrate(uni.addv, np.sqrt(sigma2), p.gross, p.cost_linear, p.cost_target),
            classification=cls,
            history=history,
        )
        self._states[key] = st
        return st

    def refresh_index(self, day) -> int:
        return int(np.searchsorted(np.asarray(self.refresh_dates), np.datetime64(day, "D"), side="right")) - 1

    def holdings(self, spec: StrategySpec, day, optimizer: OptimizerConfig | None = None):
        """Dollar holdings for ``day``: (state, member rows traded, Holdings or None)."""
        p = self.params
        st = self.state(self.refresh_index(day), spec.classification)
        t = self.panel.date_index(day)
        cols = st.universe.index
        sig = signal_values(self.panel, spec.ret, t, cols)
        ok = np.isfinite(sig) & np.isfinite(self.panel.open[t, cols]) & np.isfinite(self.panel.close[t, cols])
        rows = np.flatnonzero(ok)
        if rows.size < 2:
            logger.warning("%s: %d tradable members on %s; holding nothing", spec.label, rows.size, day)
            return st, rows, None
        sub = st.dummy.take(rows)
        direction = direction_of(spec.ret)
        if spec.constructor == "REG":
            h = regression_portfolio(sig[rows], sub, st.sigma2[rows], st.bounds[rows], direction, p.gross, asof=day)
        else:
            eps = weighted_regression_residuals(sig[rows], sub, 1.0 / st.sigma2[rows])
            sign = -1.0 if direction == "mean-reversion" else 1.0
            model = st.risk_model(p.specific_floor).take(rows)
            h = optimize_portfolio(sign * eps, model, st.bounds[rows], p.gross, optimizer, asof=day)
        return st, rows, h

    def run(self, spec: StrategySpec, optimizer: OptimizerConfig | None = None) -> BacktestResult:
        dates = self.pnl_dates
        m = dates.size
        out = {k: np.zeros(m) for k in ("gross", "cost", "dollars", "shares", "names")}
        bad = 0
        for i, day in enumerate(dates):
            st, rows, h = self.holdings(spec, day, optimizer)
            if h is None:
                continue
            bad += not h.converged
            t = self.panel.date_index(day)
            cols = st.universe.index[rows]
            op, cl = self.panel.open[t, cols], self.panel.close[t, cols]
            d = h.dollars
            a = np.abs(d)
            out["gross"][i] = float(d @ ((cl - op) / op))
            sig = np.sqrt(st.sigma2[rows])
            addv = st.universe.addv[rows]
            # establish and liquidate legs trade the same dollars
            out["cost"][i] = 2.0 * float(trade_cost(a, addv, sig, st.cost_model).sum())
            out["dollars"][i] = 2.0 * a.sum()
            out["shares"][i] = float((a / op).sum() + (a / cl).sum())
            out["names"][i] = np.count_nonzero(d)
        pnl = out["gross"] - out["cost"] if spec.costs else out["gross"].copy()
        return BacktestResult(
            spec=spec,
            dates=dates,
            daily_pnl=pnl,
            gross_pnl=out["gross"],
            costs=out["cost"],
            traded_dollars=out["dollars"],
            traded_shares=out["shares"],
            n_names=out["names"].astype(int),
            capital=self.params.gross,
            nonconverged_days=bad,
        )


def run_backtest(
    panel: BarPanel,
    spec: StrategySpec,
    params: BacktestParams | None = None,
    fundamental: Classification | None = None,
    engine: Backtester | None = None,
) -> BacktestResult:
    engine = engine or Backtester(panel, params, fundamental)
    return engine.run(spec)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from statarb.backtest import (
    FIGURE_RETURN_ORDER,
    BacktestParams,
    Backtester,
    StrategySpec,
    run_backtest,
    strategy_grid,
)
from statarb.classify import Classification
from statarb.data import BarPanel
from statarb.metrics import drawdown
from statarb.synth import SynthConfig, generate_market

I = 2.0e7
SMALL = BacktestParams(universe_size=40, backtest_days=63, stat_levels=(6, 3), kmeans_restarts=2)


@pytest.fixture(scope="module")
def market():
    return generate_market(SynthConfig(n_tickers=50, n_industries=5, normal_days=100, selloff_days=10, seed=5))


@pytest.fixture(scope="module")
def engine(market):
    return Backtester(market.panel, SMALL, Classification((market.labels,), "fundamental"))


def two_stock_panel(days=60, r=0.01, m=0.001):
    sign = np.where(np.arange(days) % 2 == 0, 1.0, -1.0)
    ret = np.column_stack([m + r * sign, m - r * sign])
    ret[0] = 0
    close = 100 * np.cumprod(1 + ret, axis=0)
    op = np.vstack([close[:1], close[:-1]])  # open at the prior close: intraday return = daily return
    cal = np.busday_offset(np.datetime64("2020-01-01"), np.arange(days), roll="forward")
    return BarPanel(cal, ("A", "B"), op, close, np.full((days, 2), 1e8))


def test_two_stock_mean_reversion_always_wins():
    panel = two_stock_panel()
    cls = Classification(({"A": 1, "B": 1},), "fundamental")
    res = run_backtest(panel, StrategySpec("C2C1"), BacktestParams(universe_size=2, backtest_days=30), cls)
    assert res.daily_pnl.size == 29
    assert np.all(res.daily_pnl > 0)


def test_flat_market_zero_holdings():
    days = 40
    cal = np.busday_offset(np.datetime64("2020-01-01"), np.arange(days), roll="forward")
    panel = BarPanel(cal, ("A", "B", "C"), np.full((days, 3), 10.0), np.full((days, 3), 10.0), np.full((days, 3), 1e6))
    cls = Classification(({"A": 1, "B": 1, "C": 2},), "fundamental")
    res = run_backtest(panel, StrategySpec("C2C1", "SIC", "OPT"), BacktestParams(universe_size=3, backtest_days=10), cls)
    assert not res.daily_pnl.any() and not res.traded_shares.any()
    s = res.summary()
    assert s["ROC"] == 0 and math.isnan(s["Sharpe"]) and math.isnan(s["CPC"]) and s["Drawdown"] == 0


def test_pnl_count_and_schedule(engine):
    assert engine.pnl_dates.size == 62
    assert len(engine.refresh_dates) == 3
    full = Backtester(generate_market(SynthConfig(n_tickers=10, n_industries=2, normal_days=280)).panel)
    assert full.pnl_dates.size == 251 and len(full.refresh_dates) == 12


@pytest.mark.parametrize("spec", [StrategySpec("C2C5", "SIC", "REG", True), StrategySpec("MOM1", "STAT", "OPT", True)])
def test_deterministic(market, spec):
    cls = Classification((market.labels,), "fundamental")
    a = run_backtest(market.panel, spec, SMALL, cls)
    b = run_backtest(market.panel, spec, SMALL, cls)
    assert a.daily_pnl.tobytes() == b.daily_pnl.tobytes()


@pytest.mark.parametrize("spec", strategy_grid(), ids=lambda s: s.label)
def test_cell_invariants(engine, spec):
    res = engine.run(spec)
    assert np.all(np.abs(res.daily_pnl) <= I)
    assert np.all(res.traded_dollars <= 2 * I * (1 + 1e-9))
    assert res.nonconverged_days == 0
    if spec.costs:
        costless = engine.run(StrategySpec(spec.ret, spec.classification, spec.constructor, False))
        assert np.all(res.daily_pnl <= costless.daily_pnl)
        held = res.traded_dollars > 0
        assert np.all(res.daily_pnl[held] < costless.daily_pnl[held])
        assert np.all(res.daily_pnl[~held] == costless.daily_pnl[~held])


def test_reg_holdings_industry_neutral(engine):
    for day in engine.pnl_dates[::7]:
        st_, rows, h = engine.holdings(StrategySpec("C2C1"), day)
        lab = st_.dummy.take(rows).labels
        assert np.all(np.abs(np.bincount(lab, h.dollars)) <= 1e-6 * I)


def test_shares_and_costs_both_legs(market, engine):
    spec = StrategySpec("C2C1", costs=True)
    res = engine.run(spec)
    day = engine.pnl_dates[10]
    st_, rows, h = engine.holdings(spec, day)
    t = market.panel.date_index(day)
    cols = st_.universe.index[rows]
    a = np.abs(h.dollars)
    shares = (a / market.panel.open[t, cols]).sum() + (a / market.panel.close[t, cols]).sum()
    assert res.traded_shares[10] == pytest.approx(shares, rel=1e-12)
    assert res.traded_dollars[10] == pytest.approx(2 * a.sum(), rel=1e-12)


@settings(max_examples=10)
@given(st.integers(30, 100), st.sampled_from(["C2C1", "C2C5", "MOM1"]), st.sampled_from(["REG", "OPT"]))
def test_no_lookahead(market, t, ret, cons):
    cls = Classification((market.labels,), "fundamental")
    spec = StrategySpec(ret, "SIC", cons)
    base = Backtester(market.panel, SMALL, cls)
    p = market.panel
    close, op = p.close.copy(), p.open.copy()
    close[t:] *= 1.3
    op[t:] *= 0.8
    bumped = Backtester(BarPanel(p.calendar, p.tickers, op, close, p.volume * 1.0), SMALL, cls)
    for day in base.pnl_dates:
        if p.date_index(day) >= t:
            break
        _, r1, h1 = base.holdings(spec, day)
        _, r2, h2 = bumped.holdings(spec, day)
        np.testing.assert_array_equal(r1, r2)
        np.testing.assert_array_equal(h1.dollars, h2.dollars)


def test_evaluation_order_independent(market, engine):
    spec = StrategySpec("C2C10", "STAT", "OPT")
    res = engine.run(spec)
    fresh = Backtester(market.panel, SMALL, engine.fundamental)
    for i in np.random.default_rng(0).permutation(res.dates.size)[:15]:
        day = res.dates[i]
        st_, rows, h = fresh.holdings(spec, day)
        t = market.panel.date_index(day)
        cols = st_.universe.index[rows]
        op, cl = market.panel.open[t, cols], market.panel.close[t, cols]
        assert float(h.dollars @ ((cl - op) / op)) == res.daily_pnl[i]


def test_refresh_frozen_variances(engine):
    a = engine.state(0, "SIC")
    assert engine.state(0, "SIC") is a
    d0, d1 = engine.pnl_dates[0], engine.pnl_dates[19]
    assert engine.refresh_index(d0) == engine.refresh_index(d1) == 0
    assert engine.refresh_index(engine.refresh_dates[1]) == 1


def test_spec_labels():
    s = StrategySpec("C2C1", "SIC", "REG", False)
    assert s.label == "C2C1_SIC_REG_N" and StrategySpec.parse(s.label) == s
    assert StrategySpec.parse("MOM1/STAT/OPT/Y") == StrategySpec("MOM1", "STAT", "OPT", True)
    for bad in ("C2C3_SIC_REG_N", "C2C1_GICS_REG_N", "C2C1_SIC_REG"):
        with pytest.raises(ValueError):
            StrategySpec.parse(bad)


def test_table_grid_order():
    grid = strategy_grid()
    assert len(grid) == 36 and len(set(grid)) == 36
    assert [s.row() for s in grid[:4]] == [["D0", "SIC", "REG", "N"], ["D0", "SIC", "REG", "Y"], ["MOM1", "SIC", "REG", "N"], ["MOM1", "SIC", "REG", "Y"]]
    assert grid[-1].row() == ["C2C20", "STAT", "OPT", "Y"]
    assert FIGURE_RETURN_ORDER == ("C2C20", "C2C10", "C2C5", "C2C1", "MOM1", "D0")


def test_summary_window(engine, market):
    res = engine.run(StrategySpec("C2C1"))
    lo, hi = market.window("selloff")
    s = res.summary((lo, hi))
    assert s["Drawdown"] == drawdown(res.daily_pnl, res.dates, (lo, hi))[0]
    assert s["Trough"] is None or lo <= s["Trough"] <= hi


def test_sic_requires_classification(market):
    with pytest.raises(ValueError):
        Backtester(market.panel, SMALL).run(StrategySpec("C2C1"))

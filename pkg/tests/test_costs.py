import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from statarb.costs import BPS, CostModel, average_rate, calibrate, trade_cost

I = 2.0e7


def test_zero_trade():
    assert trade_cost(0.0, 1e6, 0.02, CostModel(5 * BPS, 3.0)) == 0.0


def test_linear_only():
    assert trade_cost(1e6, 1e8, 0.02, CostModel(10 * BPS, 0.0)) == pytest.approx(1000.0, rel=1e-14)


def test_bad_addv():
    with pytest.raises(ValueError):
        trade_cost(1.0, 0.0, 0.01, CostModel())
    with pytest.raises(ValueError):
        CostModel(-1e-4)


def test_identical_members_closed_form():
    n, addv, sigma = 100, 5e7, 0.02
    m = calibrate(np.full(n, addv), np.full(n, sigma), I)
    oracle = (10 - 5) * BPS / (sigma * (I / n / addv) ** 0.6)
    assert m.impact == pytest.approx(oracle, rel=1e-12)
    assert average_rate(m, np.full(n, addv), np.full(n, sigma), I) == pytest.approx(10 * BPS, abs=0.1 * BPS)


def test_zero_sigma_degenerate(caplog):
    m = calibrate(np.full(5, 1e7), np.zeros(5), I)
    assert m.impact == 0.0 and "zero" in caplog.text
    assert average_rate(m, np.full(5, 1e7), np.zeros(5), I) == pytest.approx(5 * BPS)


def test_heterogeneous_universe_reevaluation():
    rng = np.random.default_rng(0)
    addv = rng.lognormal(17, 1.2, 2000)
    sigma = rng.uniform(0.005, 0.06, 2000)
    m = calibrate(addv, sigma, I)
    rate = np.mean([trade_cost(I / 2000, a, s, m) / (I / 2000) for a, s in zip(addv, sigma)])
    assert abs(rate - 10 * BPS) <= 1e-3 * BPS
    assert m.reference_participation == pytest.approx(np.mean(I / 2000 / addv))


def test_calibrate_from_universe():
    from statarb.data import Universe

    uni = Universe(np.datetime64("2020-01-02"), 21, ("A", "B"), np.array([1e7, 2e7]), np.array([4e-4, 1e-4]), np.array([0, 1]))
    assert calibrate(uni, gross=I) == calibrate(uni.addv, np.sqrt(uni.sigma2), I)


positive = st.floats(1e-3, 1e9, allow_nan=False)


@given(positive, st.floats(1e-4, 0.2), st.floats(1e4, 1e10), st.floats(0.01, 50))
def test_monotone_and_superlinear(t, sigma, addv, b):
    m = CostModel(5 * BPS, b)
    c = trade_cost(t, addv, sigma, m)
    assert trade_cost(t * 1.1, addv, sigma, m) > c
    assert trade_cost(t, addv, sigma * 1.1, m) > c
    assert trade_cost(t, addv / 1.1, sigma, m) > c
    assert trade_cost(2 * t, addv, sigma, m) > 2 * c

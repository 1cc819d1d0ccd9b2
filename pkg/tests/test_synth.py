import numpy as np
import pytest

from statarb.data import load_bars
from statarb.synth import SynthConfig, generate_market, write_market


def test_deterministic():
    cfg = SynthConfig(n_tickers=20, n_industries=4, normal_days=30, selloff_days=5, seed=9)
    a, b = generate_market(cfg), generate_market(cfg)
    np.testing.assert_array_equal(a.panel.close, b.panel.close)
    np.testing.assert_array_equal(a.panel.open, b.panel.open)
    np.testing.assert_array_equal(a.panel.volume, b.panel.volume)
    assert a.labels == b.labels


def test_regime_boundary_no_backward_leak():
    base = SynthConfig(n_tickers=30, n_industries=5, normal_days=40, seed=2)
    a = generate_market(base)
    b = generate_market(SynthConfig(n_tickers=30, n_industries=5, normal_days=40, selloff_days=20, seed=2))
    np.testing.assert_array_equal(a.panel.close, b.panel.close[:40])
    np.testing.assert_array_equal(a.panel.open, b.panel.open[:40])


def test_intra_industry_correlation():
    m = generate_market(SynthConfig(industry_sizes=(10,) + (10,) * 19, normal_days=253, seed=1))
    codes = np.array([m.labels[t] for t in m.panel.tickers])
    r = m.panel.returns[1:]
    rows = np.flatnonzero(codes == codes[0])
    assert rows.size == 10
    c = np.corrcoef(r[:, rows].T)
    assert c[np.triu_indices(10, 1)].mean() >= 0.3


def test_selloff_vol_ratio():
    m = generate_market(SynthConfig(normal_days=252, selloff_days=60, seed=4))
    r = np.log(m.panel.close[1:] / m.panel.close[:-1])
    sell = m.regimes[1:] == "selloff"
    ratio = r[sell].std() / r[~sell].std()
    assert 2.5 <= ratio <= 3.5


def test_mean_reversion_planted():
    m = generate_market(SynthConfig(market_vol=0, industry_vol=0, normal_days=500, seed=0))
    r = np.log(m.panel.close[1:] / m.panel.close[:-1])
    ac = np.mean([np.corrcoef(r[1:, j], r[:-1, j])[0, 1] for j in range(r.shape[1])])
    assert ac == pytest.approx(-0.3, abs=0.03)


def test_volumes_positive_and_bars_valid():
    m = generate_market(SynthConfig(n_tickers=50, n_industries=5, normal_days=20, selloff_days=5))
    assert np.all(m.panel.volume > 0) and np.all(m.panel.open > 0)
    assert m.window("selloff")[0] == m.panel.calendar[20]


def test_write_round_trip(tmp_path):
    m = generate_market(SynthConfig(n_tickers=10, n_industries=2, normal_days=15))
    paths = write_market(m, tmp_path)
    p = load_bars(paths["bars"])
    np.testing.assert_array_equal(p.close, m.panel.close)
    assert paths["labels"].read_text().splitlines()[0] == "ticker,code"
    assert len(paths["regimes"].read_text().splitlines()) == 16


@pytest.mark.parametrize(
    "kw",
    [dict(market_vol=-1.0), dict(phi=0.2), dict(phi=-1.0), dict(split=1.5), dict(n_industries=0), dict(industry_sizes=(1, 2))],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SynthConfig(**kw)

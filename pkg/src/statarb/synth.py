"""Seeded synthetic daily bars with a normal and a selloff regime.

Daily log-returns follow ``beta_i * m_t + gamma_i * g_{A(i),t} + u_it`` where
``u`` is AR(1). Each day is built from an independent overnight leg and
intraday leg whose shock variances split by ``split`` (the overnight share),
which yields the open and close.

In the selloff regime the market gets a negative drift, every volatility is
multiplied, a fraction of tickers takes its factor exposure from a randomly
drawn industry, and the residual autocorrelation switches to
``selloff_phi``. Random streams are drawn day by day, so bars before the
switch do not depend on what follows.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import BarPanel, write_bars

NORMAL = "normal"
SELLOFF = "selloff"


@dataclass(frozen=True)
class SynthConfig:
    n_tickers: int = 200
    n_industries: int = 20
    industry_sizes: tuple[int, ...] | None = None  # default: as equal as possible
    market_vol: float = 0.01
    industry_vol: float = 0.01
    idio_vol: float = 0.02  # stationary std of the residual
    phi: float = -0.3
    normal_days: int = 300
    selloff_days: int = 0
    selloff_drift: float = -0.02
    selloff_vol_multiplier: float = 3.0
    scramble_fraction: float = 0.5
    selloff_phi: float = 0.3
    split: float = 0.3
    beta_range: tuple[float, float] = (0.5, 1.5)
    gamma_range: tuple[float, float] = (0.5, 1.5)
    median_dollar_volume: float = 5.0e7
    volume_dispersion: float = 0.5  # cross-sectional lognormal sigma of mean volume
    volume_noise: float = 0.2  # daily lognormal sigma around each ticker's mean
    start: str = "2019-01-02"
    seed: int = 0

    def __post_init__(self):
        for name in ("market_vol", "industry_vol", "idio_vol", "selloff_vol_multiplier", "volume_dispersion", "volume_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not -1 < self.phi <= 0:
            raise ValueError("phi must lie in (-1, 0]")
        if not -1 < self.selloff_phi < 1:
            raise ValueError("selloff_phi must lie in (-1, 1)")
        if not 0 <= self.split <= 1:
            raise ValueError("split must lie in [0, 1]")
        if not 0 <= self.scramble_fraction <= 1:
            raise ValueError("scramble_fraction must lie in [0, 1]")
        if self.n_tickers < 2 or self.n_industries < 1 or self.n_industries > self.n_tickers:
            raise ValueError("need at least 2 tickers and 1..n_tickers industries")
        if self.industry_sizes is not None:
            if len(self.industry_sizes) != self.n_industries or sum(self.industry_sizes) != self.n_tickers:
                raise ValueError("industry_sizes must have n_industries entries summing to n_tickers")
        if self.normal_days < 2 or self.selloff_days < 0:
            raise ValueError("need at least 2 normal days")

    @property
    def n_days(self) -> int:
        return self.normal_days + self.selloff_days

    def schedule(self) -> np.ndarray:
        return np.array([NORMAL] * self.normal_days + [SELLOFF] * self.selloff_days)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SynthMarket:
    panel: BarPanel
    labels: dict  # ticker -> planted industry code
    regimes: np.ndarray

    def window(self, regime: str) -> tuple:
        dates = self.panel.calendar[self.regimes == regime]
        return dates[0], dates[-1]


def industry_code(k: int) -> int:
    return 1000 + k


def _sizes(cfg: SynthConfig) -> np.ndarray:
    if cfg.industry_sizes is not None:
        return np.asarray(cfg.industry_sizes, dtype=int)
    base, extra = divmod(cfg.n_tickers, cfg.n_industries)
    return np.array([base + (k < extra) for k in range(cfg.n_industries)], dtype=int)


def generate_market(cfg: SynthConfig) -> SynthMarket:
    n, k, s = cfg.n_tickers, cfg.n_industries, cfg.split
    static, shocks, volumes, scramble = (np.random.default_rng(c) for c in np.random.SeedSequence(cfg.seed).spawn(4))

    industry = np.repeat(np.arange(k), _sizes(cfg))
    industry = static.permutation(industry)
    beta = static.uniform(*cfg.beta_range, size=n)
    gamma = static.uniform(*cfg.gamma_range, size=n)
    price0 = np.exp(static.uniform(np.log(20.0), np.log(200.0), size=n))
    dollar_vol = cfg.median_dollar_volume * np.exp(cfg.volume_dispersion * static.standard_normal(n))
    log_shares = np.log(dollar_vol / price0)

    cal = np.busday_offset(np.datetime64(cfg.start, "D"), np.arange(cfg.n_days), roll="forward")
    regimes = cfg.schedule()
    T = cfg.n_days
    op, cl, vol = np.empty((T, n)), np.empty((T, n)), np.empty((T, n))

    exposure = industry
    u = np.zeros(n)
    prev_close = price0
    innov_scale = np.sqrt(1.0 - cfg.phi**2)
    for t in range(T):
        selloff = regimes[t] == SELLOFF
        if selloff and exposure is industry:
            moved = scramble.random(n) < cfg.scramble_fraction
            exposure = np.where(moved, scramble.integers(0, k, size=n), industry)
        mult = cfg.selloff_vol_multiplier if selloff else 1.0
        drift = cfg.selloff_drift if selloff else 0.0
        ar = cfg.selloff_phi if selloff else cfg.phi
        z = shocks.standard_normal((2, 1 + k + n))
        legs = []
        for share, zz in ((s, z[0]), (1.0 - s, z[1])):
            root = np.sqrt(share) * mult
            m = share * drift + root * cfg.market_vol * zz[0]
            g = root * cfg.industry_vol * zz[1 : 1 + k]
            e = root * cfg.idio_vol * innov_scale * zz[1 + k :]
            legs.append((m, g, e))
        (m_on, g_on, e_on), (m_id, g_id, e_id) = legs
        u_on = s * ar * u + e_on
        u_id = (1.0 - s) * ar * u + e_id
        u = u_on + u_id
        r_on = beta * m_on + gamma * g_on[exposure] + u_on
        r_id = beta * m_id + gamma * g_id[exposure] + u_id
        op[t] = prev_close * np.exp(r_on)
        cl[t] = op[t] * np.exp(r_id)
        prev_close = cl[t]
        vol[t] = np.round(np.exp(log_shares + cfg.volume_noise * volumes.standard_normal(n)))

    width = max(4, len(str(n - 1)))
    tickers = tuple(f"S{j:0{width}d}" for j in range(n))
    panel = BarPanel(cal, tickers, op, cl, vol)
    labels = {t: industry_code(int(a)) for t, a in zip(tickers, industry)}
    return SynthMarket(panel, labels, regimes)


def write_market(market: SynthMarket, directory) -> dict:
    """Write ``bars.csv``, ``labels.csv`` (ticker,code) and ``regimes.csv`` (date,regime)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    bars = write_bars(market.panel, d / "bars.csv")
    with open(d / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", "code"])
        for t in market.panel.tickers:
            w.writerow([t, market.labels[t]])
    with open(d / "regimes.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "regime"])
        for day, r in zip(market.panel.calendar.astype(str), market.regimes):
            w.writerow([day, r])
    return {"bars": bars, "labels": d / "labels.csv", "regimes": d / "regimes.csv"}

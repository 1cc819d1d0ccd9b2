"""Trading-cost model: linear fee plus a volatility-scaled 3/5-power impact term."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

logger = logging.getLogger(__name__)

BPS = 1e-4
IMPACT_EXPONENT = 0.6


@dataclass(frozen=True)
class CostModel:
    linear: float = 5 * BPS
    impact: float = 0.0
    exponent: float = IMPACT_EXPONENT
    reference_participation: float = float("nan")  # mean T/ADDV of the calibration portfolio
    reference_sigma: float = float("nan")  # mean daily volatility at calibration

    def __post_init__(self):
        if self.linear < 0 or self.impact < 0:
            raise ValueError("cost coefficients must be non-negative")

    def as_dict(self) -> dict:
        return asdict(self)


def trade_cost(dollars, addv, sigma, model: CostModel):
    """Dollar cost of trading ``dollars`` (unsigned): T * (a + b * sigma * (T/addv)^0.6)."""
    t = np.abs(np.asarray(dollars, dtype=float))
    addv = np.asarray(addv, dtype=float)
    if np.any(addv <= 0):
        raise ValueError("ADDV must be positive")
    rate = model.linear + model.impact * np.asarray(sigma, dtype=float) * (t / addv) ** model.exponent
    out = t * rate
    return float(out) if out.ndim == 0 else out


def calibrate(
    addv,
    sigma=None,
    gross: float = 2.0e7,
    linear: float = 5 * BPS,
    target: float = 10 * BPS,
    exponent: float = IMPACT_EXPONENT,
) -> CostModel:
    """Fit the impact coefficient so an equal-weight portfolio of ``gross``, traded
    once, pays ``target`` of traded dollars on average.

    ``addv``/``sigma`` may also be given as a Universe (sigma from its variance).
    The average rate is linear in the impact coefficient, so the root is
    found in closed form.
    """
    if hasattr(addv, "members"):
        universe = addv
        addv, sigma = universe.addv, np.sqrt(universe.sigma2)
    addv = np.asarray(addv, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if addv.size == 0:
        raise ValueError("cannot calibrate costs on an empty universe")
    per_name = gross / addv.size
    part = per_name / addv
    shape = float(np.mean(sigma * part**exponent))
    ref = dict(reference_participation=float(part.mean()), reference_sigma=float(sigma.mean()))
    if not shape > 0:
        logger.warning("all volatilities are zero; impact term cannot be calibrated, using linear cost only")
        return CostModel(linear, 0.0, exponent, **ref)
    impact = max(target - linear, 0.0) / shape
    return CostModel(linear, impact, exponent, **ref)


def average_rate(model: CostModel, addv, sigma, gross: float = 2.0e7) -> float:
    """Mean cost rate across members of the equal-weight portfolio of ``gross``."""
    addv = np.asarray(addv, dtype=float)
    t = np.full(addv.size, gross / addv.size)
    return float(np.mean(trade_cost(t, addv, sigma, model) / t))

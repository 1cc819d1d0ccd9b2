"""Industry + market factor risk model, kept in factor form.

Covariance is ``diag(specific_var) + loadings @ factor_cov @ loadings.T``; it
is never materialized except by :meth:`RiskModel.dense` for audits and tests.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classify import DummyMatrix

logger = logging.getLogger(__name__)

MARKET = "MARKET"


@dataclass(frozen=True)
class RiskModel:
    tickers: tuple[str, ...]
    factors: tuple
    loadings: np.ndarray  # member x factor
    factor_cov: np.ndarray
    specific_var: np.ndarray
    sample_var: np.ndarray

    def __len__(self):
        return len(self.tickers)

    def dense(self) -> np.ndarray:
        return np.diag(self.specific_var) + self.loadings @ self.factor_cov @ self.loadings.T

    def covariance_apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != len(self.tickers):
            raise ValueError(f"vector length {x.shape[0]} != {len(self.tickers)} members")
        return covariance_apply(self, x)

    def implied_variance(self) -> np.ndarray:
        return self.specific_var + np.einsum("ia,ab,ib->i", self.loadings, self.factor_cov, self.loadings)

    def take(self, rows: np.ndarray) -> "RiskModel":
        """Sub-model for member positions ``rows`` (factor covariance unchanged)."""
        return RiskModel(
            tickers=tuple(self.tickers[i] for i in rows),
            factors=self.factors,
            loadings=self.loadings[rows],
            factor_cov=self.factor_cov,
            specific_var=self.specific_var[rows],
            sample_var=self.sample_var[rows],
        )

    def factor_root(self) -> np.ndarray:
        """``U`` with ``U @ U.T == loadings @ factor_cov @ loadings.T``."""
        w, v = np.linalg.eigh(self.factor_cov)
        keep = w > 1e-14 * max(w.max(), 0.0) if w.size else w > 0
        return self.loadings @ (v[:, keep] * np.sqrt(w[keep]))


def covariance_apply(model: RiskModel, x: np.ndarray) -> np.ndarray:
    """``Gamma @ x`` in factor form; ``x`` may be a vector or a member x m matrix."""
    spec = model.specific_var if x.ndim == 1 else model.specific_var[:, None]
    return spec * x + model.loadings @ (model.factor_cov @ (model.loadings.T @ x))


def _first_pc(corr: np.ndarray) -> np.ndarray | None:
    if not np.all(np.isfinite(corr)):
        return None
    w, v = np.linalg.eigh(corr)
    if w.size > 1 and w[-1] - w[-2] <= 1e-10 * max(abs(w[-1]), 1.0):
        return None
    pc = v[:, -1]
    return -pc if pc.sum() < 0 else pc


def industry_loadings(returns: np.ndarray, sigma: np.ndarray, dummy: DummyMatrix) -> np.ndarray:
    """Per industry: sigma_i times the unit first PC of the intra-industry correlation matrix."""
    n, k = len(dummy.tickers), len(dummy.clusters)
    out = np.zeros((n, k))
    for a in range(k):
        rows = np.flatnonzero(dummy.labels == a)
        if rows.size == 1:
            v = np.ones(1)
        else:
            with np.errstate(invalid="ignore", divide="ignore"):
                corr = np.corrcoef(returns[rows])
            v = _first_pc(corr)
            if v is None:
                logger.warning("industry %s: degenerate correlation matrix, using equal-weight loading", dummy.clusters[a])
                v = np.full(rows.size, 1.0 / np.sqrt(rows.size))
        out[rows, a] = sigma[rows] * v
    return out


def factor_returns(returns: np.ndarray, loadings: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    """Daily weighted cross-sectional regression of returns on loadings, weights 1/sigma2.

    Returns factor x day. Rank-deficient designs get the minimum-norm fit.
    """
    s = np.sqrt(sigma2)[:, None]
    f, *_ = np.linalg.lstsq(loadings / s, returns / s, rcond=None)
    return f


def _floor_factor_cov(loadings, phi, sigma2, floor):
    """Shrink ``phi`` so the factor part of each variance leaves at least ``floor * sigma2``."""
    cap = (1.0 - floor) * sigma2
    full = np.einsum("ia,ab,ib->i", loadings, phi, loadings)
    if np.all(full <= cap):
        return phi
    diag_phi = np.diag(np.diag(phi))
    diag_only = (loadings**2) @ np.diag(phi)
    over = full > cap
    # factor part is linear in kappa along (1-kappa)*phi + kappa*diag(phi)
    slope = full[over] - diag_only[over]
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(slope > 0, (full[over] - cap[over]) / slope, np.nan)
    # members that shrinkage cannot help are left to the uniform rescale below
    kappa = float(min(1.0, np.nanmax(need))) if np.any(np.isfinite(need)) else 0.0
    phi = (1.0 - kappa) * phi + kappa * diag_phi
    full = np.einsum("ia,ab,ib->i", loadings, phi, loadings)
    if np.any(full > cap):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(full > 0, cap / full, np.inf)
        phi = phi * float(min(1.0, ratio.min()))
    logger.debug("specific-variance floor bound; factor covariance shrunk (kappa=%.4f)", kappa)
    return phi


def build_risk_model(
    returns: np.ndarray,
    dummy: DummyMatrix,
    sigma2: np.ndarray | None = None,
    floor: float = 0.05,
) -> RiskModel:
    """Build the model from member x day returns strictly before the refresh date.

    ``sigma2`` defaults to the sample variance (n-1) of ``returns``.
    """
    returns = np.asarray(returns, dtype=float)
    if returns.shape[0] != len(dummy.tickers):
        raise ValueError("returns rows must match the dummy matrix rows")
    if not np.all(np.isfinite(returns)):
        raise ValueError("risk model needs full return coverage over the lookback")
    if sigma2 is None:
        sigma2 = returns.var(axis=1, ddof=1)
    sigma2 = np.asarray(sigma2, dtype=float)
    sigma = np.sqrt(sigma2)

    omega = np.column_stack([industry_loadings(returns, sigma, dummy), sigma])
    f = factor_returns(returns, omega, sigma2)
    if f.shape[1] > 1:
        phi = np.cov(f, ddof=1)
    else:
        phi = np.zeros((omega.shape[1], omega.shape[1]))
    phi = np.atleast_2d(0.5 * (phi + phi.T))
    phi = _floor_factor_cov(omega, phi, sigma2, floor)
    factor_part = np.einsum("ia,ab,ib->i", omega, phi, omega)
    xi2 = np.maximum(sigma2 - factor_part, floor * sigma2)
    return RiskModel(
        tickers=tuple(dummy.tickers),
        factors=tuple(dummy.clusters) + (MARKET,),
        loadings=omega,
        factor_cov=phi,
        specific_var=xi2,
        sample_var=sigma2,
    )


def write_risk_model(model: RiskModel, directory) -> Path:
    """Audit dump: loadings.csv, factor_cov.csv, specific_var.csv."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    names = [str(f) for f in model.factors]
    with open(d / "loadings.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker"] + names)
        for t, row in zip(model.tickers, model.loadings):
            w.writerow([t] + [repr(float(x)) for x in row])
    with open(d / "factor_cov.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["factor"] + names)
        for name, row in zip(names, model.factor_cov):
            w.writerow([name] + [repr(float(x)) for x in row])
    with open(d / "specific_var.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", "specific_var", "sample_var"])
        for row in zip(model.tickers, model.specific_var, model.sample_var):
            w.writerow([row[0], repr(float(row[1])), repr(float(row[2]))])
    return d

"""Portfolio construction: bounded weighted regression (REG) and bounded
dollar-neutral mean-variance optimization (OPT)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .classify import DummyMatrix
from .riskmodel import RiskModel
from .signals import MEAN_REVERSION, MOMENTUM

logger = logging.getLogger(__name__)

DEFAULT_GROSS = 2.0e7


class ConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Holdings:
    dollars: np.ndarray
    bounds: np.ndarray
    gross_target: float = DEFAULT_GROSS
    tickers: tuple = ()
    asof: np.datetime64 | None = None
    converged: bool = True
    iterations: int = 0
    dropped: tuple = ()  # clusters dropped as infeasible

    @property
    def gross(self) -> float:
        return float(np.abs(self.dollars).sum())

    @property
    def net(self) -> float:
        return float(self.dollars.sum())


@dataclass(frozen=True)
class OptimizerConfig:
    risk_aversion: float | None = None  # None: calibrate so the unbounded solution has gross I
    max_iter: int = 200
    kkt_tol: float = 1e-8

    def __post_init__(self):
        if self.risk_aversion is not None and not self.risk_aversion > 0:
            raise ValueError("risk aversion must be positive")


def _labels(dummy) -> np.ndarray:
    if isinstance(dummy, DummyMatrix):
        return dummy.labels
    m = np.asarray(dummy)
    if m.ndim == 1:
        return m.astype(int)
    if not np.allclose(m.sum(axis=1), 1.0):
        raise ValueError("dummy matrix rows must each sum to 1")
    return np.argmax(m, axis=1)


def _direction_sign(direction) -> float:
    if direction in (MEAN_REVERSION, -1):
        return -1.0
    if direction in (MOMENTUM, 1):
        return 1.0
    raise ValueError(f"unknown direction {direction!r}")


def weighted_regression_residuals(returns, dummy, weights) -> np.ndarray:
    """Residuals of a weighted regression of ``returns`` on industry dummies.

    With binary dummies the fit is the weighted mean per cluster, so each
    residual is the return minus its cluster's weighted average.
    """
    r = np.asarray(getattr(returns, "values", returns), dtype=float)
    w = np.asarray(weights, dtype=float)
    lab = _labels(dummy)
    k = lab.max() + 1 if lab.size else 0
    means = np.bincount(lab, w * r, minlength=k) / np.bincount(lab, w, minlength=k)
    return r - means[lab]


def bounded_neutral_fit(target, weight, labels, bounds):
    """Solve min sum w_i (D_i - target_i)^2 s.t. per-cluster sum D = 0, |D_i| <= B_i.

    Variable fixing: solve the equality-constrained problem on free members,
    then per cluster fix the violators on the side with the larger total
    violation at their bound, and repeat. The fixed set only grows and the
    result is the exact optimum of the bounded problem.

    Returns ``(D, n_iterations, infeasible_cluster_labels)``.
    """
    target = np.asarray(target, dtype=float)
    inv = 1.0 / np.asarray(weight, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    lab = np.asarray(labels, dtype=int)
    n = target.size
    k = lab.max() + 1 if n else 0
    fixed = np.zeros(n, dtype=bool)
    fixed_val = np.zeros(n)
    d = target.copy()
    it = 0
    for it in range(1, n + 2):
        free = ~fixed
        fsum = np.bincount(lab, np.where(fixed, fixed_val, 0.0), minlength=k)
        tsum = np.bincount(lab, np.where(free, target, 0.0), minlength=k)
        isum = np.bincount(lab, np.where(free, inv, 0.0), minlength=k)
        with np.errstate(divide="ignore", invalid="ignore"):
            mu = np.where(isum > 0, -(fsum + tsum) / isum, 0.0)
        d = np.where(fixed, fixed_val, target + mu[lab] * inv)
        up = free & (d > bounds)
        lo = free & (d < -bounds)
        if not (up.any() or lo.any()):
            break
        over = np.bincount(lab, np.where(up, d - bounds, 0.0), minlength=k)
        under = np.bincount(lab, np.where(lo, -bounds - d, 0.0), minlength=k)
        fix_up = up & (over >= under)[lab]
        fix_lo = lo & (under > over)[lab]
        fixed_val[fix_up] = bounds[fix_up]
        fixed_val[fix_lo] = -bounds[fix_lo]
        fixed |= fix_up | fix_lo
    net = np.bincount(lab, d, minlength=k)
    scale = np.bincount(lab, np.abs(d), minlength=k) + np.bincount(lab, bounds, minlength=k)
    bad = np.flatnonzero(np.abs(net) > 1e-9 * np.maximum(scale, 1.0))
    if bad.size:
        d = np.where(np.isin(lab, bad), 0.0, d)
    return d, it, tuple(int(b) for b in bad)


def regression_portfolio(
    returns,
    dummy,
    sigma2,
    bounds,
    direction=MEAN_REVERSION,
    gross: float = DEFAULT_GROSS,
    asof=None,
) -> Holdings:
    """Bounded, industry-neutral weighted-regression portfolio.

    The unbounded target is ``s * eta * eps / sigma2`` with eta set so the
    target's gross is ``gross``. Bounds are then imposed by the weighted
    least-squares fit of :func:`bounded_neutral_fit`; the bounded portfolio
    is not rescaled back up to ``gross``.
    """
    sigma2 = np.asarray(sigma2, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    lab = _labels(dummy)
    eps = weighted_regression_residuals(returns, lab, 1.0 / sigma2)
    raw = _direction_sign(direction) * eps / sigma2
    tot = np.abs(raw).sum()
    tickers = tuple(getattr(dummy, "tickers", ()))
    if not tot > 0:
        return Holdings(np.zeros_like(raw), bounds, gross, tickers, asof)
    target = raw * (gross / tot)
    d, it, bad = bounded_neutral_fit(target, sigma2, lab, bounds)
    if bad:
        names = getattr(dummy, "clusters", None)
        logger.warning("dropping infeasible clusters %s", [names[b] for b in bad] if names else bad)
    return Holdings(d, bounds, gross, tickers, asof, iterations=it, dropped=bad)


class _FactorQP:
    """max E'D - lam/2 D'Gamma D with Gamma = diag(xi2) + U U'; sum D = 0; |D| <= B."""

    def __init__(self, expected, xi2, root, bounds):
        self.e = expected
        self.xi2 = xi2
        self.u = root
        self.b = bounds
        self.lam = 1.0

    def gamma_apply(self, x):
        return self.xi2 * x + self.u @ (self.u.T @ x)

    def solve(self, free: np.ndarray, fixed_val: np.ndarray):
        """Equality-constrained optimum with non-free members held at ``fixed_val``.

        Returns ``(D, nu)`` where nu is the neutrality multiplier.
        """
        f = np.flatnonzero(free)
        c = np.flatnonzero(~free)
        d = fixed_val.copy()
        if f.size == 0:
            return d, 0.0
        uf = self.u[f]
        xinv = 1.0 / self.xi2[f]
        rhs = np.empty((f.size, 2))
        rhs[:, 0] = self.e[f] / self.lam
        if c.size:
            rhs[:, 0] -= uf @ (self.u[c].T @ fixed_val[c])
        rhs[:, 1] = 1.0
        y = xinv[:, None] * rhs
        if uf.shape[1]:
            core = np.eye(uf.shape[1]) + (uf.T * xinv) @ uf
            try:
                cf = cho_factor(core)
            except np.linalg.LinAlgError as exc:
                raise ConstructionError("reduced covariance system is not positive definite") from exc
            y = y - xinv[:, None] * (uf @ cho_solve(cf, uf.T @ y))
        a, bvec = y[:, 0], y[:, 1]
        target = -fixed_val[c].sum()
        nu_scaled = (a.sum() - target) / bvec.sum()
        d[f] = a - nu_scaled * bvec
        return d, nu_scaled * self.lam

    def gradient(self, d, nu):
        return self.e - self.lam * self.gamma_apply(d) - nu

    def objective(self, d):
        return float(self.e @ d - 0.5 * self.lam * d @ self.gamma_apply(d))

    def kkt_residual(self, d, nu, upper, lower) -> float:
        g = self.gradient(d, nu)
        scale = max(np.abs(self.e).max(), 1e-300)
        free = ~(upper | lower)
        stat = np.abs(g[free]).max(initial=0.0)
        sign = max(np.maximum(-g[upper], 0).max(initial=0.0), np.maximum(g[lower], 0).max(initial=0.0))
        bscale = max(self.b.max(), 1e-300)
        feas = max(np.maximum(np.abs(d) - self.b, 0).max(initial=0.0), abs(d.sum())) / bscale
        return max(stat / scale, sign / scale, feas)


def _project_box_neutral(x, bounds):
    d, _, _ = bounded_neutral_fit(x, np.ones_like(x), np.zeros(x.size, dtype=int), bounds)
    return d


def _primal_active_set(qp: _FactorQP, x0: np.ndarray, max_iter: int):
    """Feasible-point active-set method; exact but adds/drops one bound per step."""
    b = qp.b
    x = _project_box_neutral(x0, b)
    upper = x >= b * (1 - 1e-12)
    lower = x <= -b * (1 - 1e-12)
    x = np.where(upper, b, np.where(lower, -b, x))
    nu = 0.0
    for it in range(1, max_iter + 1):
        fixed_val = np.where(upper, b, np.where(lower, -b, 0.0))
        xhat, nu = qp.solve(~(upper | lower), fixed_val)
        p = xhat - x
        if np.abs(p).max() <= 1e-12 * b.max():
            g = qp.gradient(xhat, nu)
            mult = np.where(upper, g, np.where(lower, -g, np.inf))
            j = int(np.argmin(mult))
            if mult[j] >= -1e-14 * max(np.abs(qp.e).max(), 1e-300):
                return xhat, nu, upper, lower, it
            upper[j] = lower[j] = False
            x = xhat
            continue
        free = ~(upper | lower)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(free & (p > 0), (b - x) / p, np.where(free & (p < 0), (-b - x) / p, np.inf))
        j = int(np.argmin(ratio))
        alpha = min(1.0, float(ratio[j]))
        x = x + alpha * p
        if alpha < 1.0:
            if p[j] > 0:
                upper[j], x[j] = True, b[j]
            else:
                lower[j], x[j] = True, -b[j]
    return x, nu, upper, lower, max_iter


def optimize_portfolio(
    expected,
    model: RiskModel,
    bounds,
    gross: float = DEFAULT_GROSS,
    config: OptimizerConfig | None = None,
    asof=None,
) -> Holdings:
    """Bounded dollar-neutral mean-variance portfolio.

    Risk aversion is set so the unbounded dollar-neutral optimum has gross
    exactly ``gross`` (the unbounded optimum scales as 1/lambda, so this is
    a single division). Bounds are enforced by a primal-dual active set:
    clamp members that break their bound, release clamped members whose
    multiplier has the wrong sign, re-solve the reduced problem with the
    factor-form inverse. A cycling or stalled active set falls back to a
    feasible-point active-set method.
    """
    config = config or OptimizerConfig()
    e = np.asarray(getattr(expected, "values", expected), dtype=float)
    b = np.asarray(bounds, dtype=float)
    n = e.size
    if not np.all(np.isfinite(e)):
        raise ValueError("expected returns must be finite")
    if len(model) != n:
        raise ValueError("risk model does not cover the expected-return vector")
    qp = _FactorQP(e, model.specific_var, model.factor_root(), b)
    zero = Holdings(np.zeros(n), b, gross, tuple(model.tickers), asof)
    if n < 2 or not np.any(e):
        return zero

    all_free = np.ones(n, dtype=bool)
    x, _ = qp.solve(all_free, np.zeros(n))
    scale = np.abs(x).sum()
    if not scale > 1e-300 * max(np.abs(e).max(), 1.0):
        return zero
    qp.lam = config.risk_aversion if config.risk_aversion is not None else scale / gross
    d = x / qp.lam

    upper, lower = d > b, d < -b
    if not (upper.any() or lower.any()):
        return Holdings(d, b, gross, tuple(model.tickers), asof, True, 1)

    seen = set()
    nu = 0.0
    converged = False
    it = 0
    tol_g = 1e-13 * np.abs(e).max()
    for it in range(1, config.max_iter + 1):
        free = ~(upper | lower)
        if not free.any():
            break
        fixed_val = np.where(upper, b, np.where(lower, -b, 0.0))
        d, nu = qp.solve(free, fixed_val)
        g = qp.gradient(d, nu)
        viol_up = free & (d > b)
        viol_lo = free & (d < -b)
        rel_up = upper & (g < -tol_g)
        rel_lo = lower & (g > tol_g)
        if not (viol_up.any() or viol_lo.any() or rel_up.any() or rel_lo.any()):
            converged = True
            break
        upper = (upper & ~rel_up) | viol_up
        lower = (lower & ~rel_lo) | viol_lo
        key = (np.packbits(upper).tobytes(), np.packbits(lower).tobytes())
        if key in seen:
            break
        seen.add(key)

    if not converged:
        logger.debug("active set did not settle after %d steps; using feasible active-set method", it)
        d, nu, upper, lower, it2 = _primal_active_set(qp, d, max_iter=20 * n + 100)
        it += it2

    d = np.where(upper, b, np.where(lower, -b, d))
    res = qp.kkt_residual(d, nu, upper, lower)
    ok = res <= config.kkt_tol
    if not ok:
        logger.warning("optimizer KKT residual %.3g above tolerance", res)
    return Holdings(d, b, gross, tuple(model.tickers), asof, ok, it)

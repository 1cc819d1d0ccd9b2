"""Random construction instances shared by the unit and acceptance tests."""

from dataclasses import dataclass

import numpy as np

from statarb.classify import DummyMatrix
from statarb.riskmodel import build_risk_model

GROSS = 2.0e7


@dataclass
class Instance:
    returns: np.ndarray
    labels: np.ndarray
    dummy: DummyMatrix
    sigma2: np.ndarray
    bounds: np.ndarray
    history: np.ndarray

    @property
    def n(self):
        return self.returns.size

    def model(self):
        return build_risk_model(self.history, self.dummy, self.sigma2)


def make_instance(seed, n_max=20, tight=True, n_min=4):
    """Clusters of >= 2 members; tight bounds cut into the unbounded solution."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    k = int(rng.integers(1, n // 2 + 1))
    labels = np.concatenate([np.repeat(np.arange(k), 2), rng.integers(0, k, n - 2 * k)])
    labels = rng.permutation(labels)
    days = 21
    vol = rng.uniform(0.005, 0.04, n)
    f = rng.standard_normal((k + 1, days))
    history = vol[:, None] * (0.5 * f[0] + 0.7 * f[1 + labels] + rng.standard_normal((n, days)))
    sigma2 = history.var(axis=1, ddof=1)
    returns = rng.standard_normal(n) * np.sqrt(sigma2)
    if tight:
        bounds = GROSS * rng.uniform(0.02, 0.2, n) * (4.0 / n)
    else:
        bounds = np.full(n, 10 * GROSS)
    used, lab = np.unique(labels, return_inverse=True)
    dummy = DummyMatrix(tuple(f"T{i}" for i in range(n)), tuple(int(u) for u in used), lab.astype(int))
    return Instance(returns, lab.astype(int), dummy, sigma2, bounds, history)

import numpy as np
import pytest
from hypothesis import given, strategies as st

from statarb.classify import DummyMatrix
from statarb.riskmodel import RiskModel, build_risk_model, covariance_apply, write_risk_model


def dummy(labels):
    labels = np.asarray(labels)
    used, lab = np.unique(labels, return_inverse=True)
    return DummyMatrix(tuple(f"T{i}" for i in range(labels.size)), tuple(int(u) for u in used), lab.astype(int))


def random_model(seed, n=None, days=21):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(2, 201))
    k = int(rng.integers(1, max(2, n // 3)))
    labels = rng.integers(0, k, size=n)
    f = rng.standard_normal((k + 1, days))
    load = rng.uniform(0.2, 1.5, size=(n, 2))
    r = 0.01 * (load[:, :1] * f[0] + load[:, 1:] * f[1 + labels] + rng.uniform(0.5, 3, (n, 1)) * rng.standard_normal((n, days)))
    return build_risk_model(r, dummy(labels)), r


def test_single_member():
    r = np.array([[0.01, -0.02, 0.005, 0.0]])
    m = build_risk_model(r, dummy([0]))
    sigma = r.std(ddof=1)
    np.testing.assert_allclose(m.loadings, [[sigma, sigma]], rtol=1e-14)
    assert m.dense()[0, 0] == pytest.approx(sigma**2, rel=1e-12)


def test_perfectly_correlated_pair():
    base = np.array([0.01, -0.02, 0.005, 0.012, -0.003])
    r = np.vstack([base, 3 * base])
    m = build_risk_model(r, dummy([0, 0]))
    sigma = r.std(axis=1, ddof=1)
    np.testing.assert_allclose(m.loadings[:, 0], sigma / np.sqrt(2), rtol=1e-12)


def test_one_factor_industry_matches_sample_covariance():
    rng = np.random.default_rng(11)
    n, days = 50, 252
    beta = rng.uniform(0.5, 1.5, n)
    r = 0.01 * (beta[:, None] * rng.standard_normal(days) + rng.standard_normal((n, days)))
    m = build_risk_model(r, dummy(np.zeros(n)))
    gamma = m.dense()
    sample = np.cov(r, ddof=1)
    off = ~np.eye(n, dtype=bool)
    rel = np.linalg.norm(gamma[off] - sample[off]) / np.linalg.norm(sample[off])
    assert rel <= 0.2


def test_covariance_apply_matches_dense():
    m, _ = random_model(5, n=40)
    gamma = m.dense()
    for i in range(40):
        e = np.zeros(40)
        e[i] = 1.0
        np.testing.assert_allclose(m.covariance_apply(e), gamma[:, i], rtol=1e-12, atol=1e-12 * np.abs(gamma).max())
    assert not m.covariance_apply(np.zeros(40)).any()
    with pytest.raises(ValueError):
        m.covariance_apply(np.zeros(39))


def test_diagonal_model():
    m = RiskModel(("a", "b"), ("X",), np.ones((2, 1)), np.zeros((1, 1)), np.array([2.0, 3.0]), np.array([2.0, 3.0]))
    np.testing.assert_array_equal(covariance_apply(m, np.array([1.0, -2.0])), [2.0, -6.0])


@given(st.integers(0, 100_000))
def test_model_invariants(seed):
    m, _ = random_model(seed)
    phi = m.factor_cov
    assert np.allclose(phi, phi.T)
    assert np.linalg.eigvalsh(phi).min() >= -1e-10 * np.trace(phi)
    assert np.all(m.specific_var >= 0.05 * m.sample_var * (1 - 1e-12))
    np.testing.assert_allclose(m.implied_variance(), m.sample_var, rtol=1e-8)
    x = np.random.default_rng(seed).standard_normal((len(m), 50))
    assert np.all(np.einsum("ij,ij->j", x, m.covariance_apply(x)) > 0)


@given(st.integers(0, 100_000), st.floats(0.01, 100))
def test_scale_equivariance(seed, c):
    _, r = random_model(seed, n=30)
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 5, 30)
    a = build_risk_model(r, dummy(labels))
    b = build_risk_model(c * r, dummy(labels))
    np.testing.assert_allclose(b.dense(), c * c * a.dense(), rtol=1e-8, atol=1e-12 * c * c * np.abs(a.dense()).max())


def test_degenerate_industry_warns(caplog):
    r = np.array([[0.01, 0.01, 0.01], [0.02, -0.01, 0.0], [0.01, 0.0, -0.01]])
    m = build_risk_model(r, dummy([0, 0, 1]), sigma2=np.array([1e-8, 2e-4, 1e-4]))
    assert "degenerate" in caplog.text
    assert np.all(np.isfinite(m.loadings))


def test_write_risk_model(tmp_path):
    m, _ = random_model(1, n=10)
    d = write_risk_model(m, tmp_path / "rm")
    assert sorted(p.name for p in d.iterdir()) == ["factor_cov.csv", "loadings.csv", "specific_var.csv"]
    rows = (d / "loadings.csv").read_text().splitlines()
    assert len(rows) == 11

import numpy as np
import pytest
from scipy import stats

from lvspill.errors import ParameterError, SampleSizeError
from lvspill.varmodel import (
    VarModel,
    cholesky_factor,
    fevd,
    lag_design,
    ljung_box,
    ma_coefficients,
    orth_irf,
    select_order_bic,
    simulate_var,
    structural_shocks,
    var_fit,
)

from oracles import fevd_from_irf, irf_recursion

A1 = np.array([[0.5, 0.0], [0.3, 0.2]])


def _model(coeffs, cov):
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim == 2:
        coeffs = coeffs[None]
    n = coeffs.shape[1]
    return VarModel(order=coeffs.shape[0], intercept=np.zeros(n), coeffs=coeffs,
                    resid_cov=np.asarray(cov, float), residuals=np.zeros((0, n)),
                    resid_rows=np.zeros(0, int))


def test_lag_design_layout():
    y = np.arange(12, dtype=float).reshape(6, 2)
    Y, X, rows = lag_design(y, 2)
    np.testing.assert_array_equal(rows, [2, 3, 4, 5])
    np.testing.assert_array_equal(X[0], [1, 2, 3, 0, 1])
    np.testing.assert_array_equal(Y[0], y[2])


def test_recovers_coefficients(rng):
    y = simulate_var(A1, 5000, rng)
    m = var_fit(y, order=1)
    np.testing.assert_allclose(m.coeffs[0], A1, atol=0.04)
    assert m.spectral_radius() < 1


def test_bic_picks_true_order(rng):
    A = np.stack([A1, np.array([[0.2, 0.0], [0.0, -0.3]])])
    y = simulate_var(A, 3000, rng)
    p, scores = select_order_bic(y, pmax=6)
    assert p == 2 and set(scores) == set(range(1, 7))


def test_irf_impact_is_cholesky():
    S = np.array([[1.0, 0.4], [0.4, 2.0]])
    irf = orth_irf(_model(A1, S), 5)
    np.testing.assert_allclose(irf[0], np.linalg.cholesky(S), atol=1e-14)
    assert irf[0][0, 1] == 0.0


def test_irf_against_recursion(rng):
    A = np.stack([A1, np.array([[0.1, -0.2], [0.05, 0.1]]), np.array([[0.05, 0], [0, 0.05]])])
    S = np.array([[1.0, 0.3], [0.3, 0.5]])
    m = _model(A, S)
    got = orth_irf(m, 15)
    ref = irf_recursion(A, np.linalg.cholesky(S), 15)
    np.testing.assert_allclose(got, ref, atol=1e-10)


def test_ma_identity_start():
    Phi = ma_coefficients(_model(A1, np.eye(2)), 3)
    np.testing.assert_array_equal(Phi[0], np.eye(2))
    np.testing.assert_allclose(Phi[2], A1 @ A1)


def test_fevd_oracle_and_rows():
    S = np.array([[1.0, 0.4], [0.4, 2.0]])
    m = _model(A1, S)
    F = fevd(m, 10)
    assert F.shape == (10, 2, 2)
    np.testing.assert_allclose(F.sum(axis=2), 1.0, atol=1e-12)
    np.testing.assert_allclose(F, fevd_from_irf(orth_irf(m, 9)), atol=1e-12)
    # first variable is ordered first and receives no contemporaneous second shock
    assert F[0, 0, 1] == 0.0


def test_cholesky_jitter():
    S = np.array([[1.0, 1.0], [1.0, 1.0]])
    P = cholesky_factor(S)
    np.testing.assert_allclose(P @ P.T, S, atol=1e-8)


def test_ljung_box_white_noise(rng):
    q, p = ljung_box(rng.normal(size=2000), lags=10)
    assert p > 0.01


def test_ljung_box_hand():
    e = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
    q, p = ljung_box(e, lags=1)
    d = e - e.mean()
    rho = (d[1:] @ d[:-1]) / (d @ d)
    assert q == pytest.approx(6 * 8 * rho ** 2 / 5, rel=1e-12)
    assert p == pytest.approx(stats.chi2.sf(q, 1), rel=1e-12)


def test_ljung_box_autocorrelated(rng):
    y = simulate_var(np.array([[0.7]]), 1000, rng)[:, 0]
    assert ljung_box(y, 5)[1] < 1e-10


def test_structural_shocks_orthonormal(rng):
    S = np.array([[1.0, 0.6], [0.6, 1.5]])
    y = simulate_var(A1, 4000, rng, cov=S)
    m = var_fit(y, order=1)
    u = structural_shocks(m)
    assert u.shape == (m.nobs, 2)
    np.testing.assert_allclose(np.cov(u.T, ddof=m.design.shape[1]), np.eye(2), atol=1e-10)
    np.testing.assert_allclose(u @ cholesky_factor(m.resid_cov).T, m.residuals, atol=1e-10)


def test_ordering_permutation(rng):
    y = simulate_var(A1, 800, rng)
    a = var_fit(y, order=1)
    b = var_fit(y[:, ::-1], order=1)
    np.testing.assert_allclose(b.coeffs[0], a.coeffs[0][::-1, ::-1], atol=1e-10)
    # orthogonal FEVD shares depend on the ordering, but total variance does not
    Sa = np.cumsum(orth_irf(a, 5) ** 2, axis=0)[-1].sum(axis=1)
    Sb = np.cumsum(orth_irf(b, 5) ** 2, axis=0)[-1].sum(axis=1)
    np.testing.assert_allclose(Sb, Sa[::-1], rtol=1e-10)


def test_errors(rng):
    with pytest.raises(ParameterError):
        var_fit(rng.normal(size=(100, 2)), order=0)
    with pytest.raises(SampleSizeError):
        var_fit(rng.normal(size=(30, 2)), order="bic", pmax=10)
    with pytest.raises(SampleSizeError):
        ljung_box(np.ones(5), lags=10)

import numpy as np
import pytest

from lvspill.errors import CollinearityError, DegeneracyError, ParameterError, SampleSizeError
from lvspill.harx import auto_nw_lag, har_regressors, harx_fit, newey_west_cov

from oracles import bartlett_hac, hc0_sandwich


def _design(v):
    R = har_regressors(v)
    lagged = np.full_like(R, np.nan)
    lagged[1:] = R[:-1]
    return np.column_stack([np.ones(len(v)), lagged])


def test_regressor_hand_values():
    v = np.arange(1.0, 31.0)
    R = har_regressors(v)
    assert R[9, 0] == 10.0
    assert R[9, 1] == pytest.approx(8.0)
    assert np.isnan(R[20, 2]) and R[21, 2] == pytest.approx(11.5)


@pytest.mark.parametrize("w", [(5, 1), (1, 1, 5), (0, 5)])
def test_bad_windows(w):
    with pytest.raises(ParameterError):
        har_regressors(np.ones(40), w)


def test_exact_betas(rng):
    v = rng.normal(size=(400, 2))
    X = _design(v)
    b = np.array([0.1, 0.5, -0.2, 0.3, 0.1, -0.4, 0.25])
    y = X @ b
    fit = harx_fit(y, v, nw_lag=3)
    np.testing.assert_allclose(fit.params, b, atol=1e-8)
    np.testing.assert_allclose(fit.beta_d, b[1:3], atol=1e-8)
    np.testing.assert_allclose(fit.beta_m, b[5:7], atol=1e-8)
    assert fit.r2 == pytest.approx(1.0)


def test_uses_previous_day(rng):
    v = rng.normal(size=300)
    y = np.full(300, np.nan)
    y[1:] = v[:-1]
    fit = harx_fit(y + 1e-3 * rng.normal(size=300), v)
    assert fit.beta_d[0] == pytest.approx(1.0, abs=1e-2)


def test_hc0_oracle(rng):
    X = np.column_stack([np.ones(80), rng.normal(size=(80, 2))])
    e = rng.normal(size=80)
    np.testing.assert_allclose(newey_west_cov(X, e, 0), hc0_sandwich(X, e), rtol=1e-10)


@pytest.mark.parametrize("L", [1, 4])
def test_bartlett_oracle(rng, L):
    X = np.column_stack([np.ones(60), rng.normal(size=(60, 2))])
    e = rng.normal(size=60)
    np.testing.assert_allclose(newey_west_cov(X, e, L), bartlett_hac(X, e, L), rtol=1e-10)


def test_hac_close_to_ols_under_iid(rng):
    v = rng.normal(size=5000)
    y = 0.2 + 0.3 * np.r_[np.nan, v[:-1]] + rng.normal(size=5000)
    fit = harx_fit(y, v)
    np.testing.assert_allclose(fit.hac_se, fit.ols_se, rtol=0.15)


def test_cov_symmetric_psd(rng):
    v = rng.normal(size=(300, 1))
    y = rng.normal(size=300)
    fit = harx_fit(y, v, nw_lag=8)
    np.testing.assert_array_equal(fit.cov, fit.cov.T)
    assert np.linalg.eigvalsh(fit.cov).min() > -1e-14


def test_constant_shift(rng):
    v = rng.normal(size=300)
    y = rng.normal(size=300)
    a = harx_fit(y, v)
    b = harx_fit(y + 5.0, v)
    assert b.beta0 == pytest.approx(a.beta0 + 5.0, abs=1e-10)
    np.testing.assert_allclose(b.params[1:], a.params[1:], atol=1e-10)
    np.testing.assert_allclose(b.hac_se, a.hac_se, rtol=1e-8)


def test_auto_lag():
    assert auto_nw_lag(100) == 4
    assert auto_nw_lag(1000) == 6
    assert harx_fit(np.random.default_rng(1).normal(size=600),
                    np.random.default_rng(2).normal(size=600)).nw_lag == auto_nw_lag(578)


def test_names_and_frame(rng):
    fit = harx_fit(rng.normal(size=200), rng.normal(size=(200, 2)), regressor_names=["a", "b"])
    assert fit.names == ["const", "d_a", "d_b", "w_a", "w_b", "m_a", "m_b"]
    assert list(fit.to_frame().columns) == ["coefficient", "estimate", "se", "tstat", "p"]


def test_errors(rng):
    v = rng.normal(size=300)
    with pytest.raises(DegeneracyError):
        harx_fit(np.ones(300), v)
    with pytest.raises(CollinearityError):
        harx_fit(rng.normal(size=300), np.column_stack([v, 2 * v]))
    with pytest.raises(SampleSizeError):
        harx_fit(rng.normal(size=40), rng.normal(size=40))

import math

import numpy as np
import pytest

from lvspill.errors import DegeneracyError, ParameterError, ShapeError
from lvspill.factors import (
    CrowdingSpec,
    RiskIndexSpec,
    crowding_target,
    forward_target,
    legacy_rv_targets,
    nearest_rank,
    pca_fit,
    pca_transform,
    risk_index,
)


class TestPca:
    def test_rank_one(self, rng):
        x = rng.normal(size=200)
        m = pca_fit(np.column_stack([x, 3 * x + 1]), k=1)
        assert m.explained_ratio[0] == pytest.approx(1.0, abs=1e-10)

    def test_independent_noise(self, rng):
        m = pca_fit(rng.normal(size=(10000, 2)), k=2)
        np.testing.assert_allclose(m.explained_ratio, [0.5, 0.5], atol=0.05)

    def test_orthonormal_and_sign(self, rng):
        x = rng.normal(size=(300, 5)) @ rng.normal(size=(5, 5))
        m = pca_fit(x, k=5)
        np.testing.assert_allclose(m.loadings.T @ m.loadings, np.eye(5), atol=1e-8)
        for c in range(5):
            j = np.argmax(np.abs(m.loadings[:, c]))
            assert m.loadings[j, c] > 0
        assert np.all(np.diff(m.all_explained_ratio) <= 1e-15)
        assert m.all_explained_ratio.sum() == pytest.approx(1.0)

    def test_cum_variance(self, rng):
        f = rng.normal(size=(500, 1))
        x = f @ np.ones((1, 4)) + 0.3 * rng.normal(size=(500, 4))
        m = pca_fit(x, cum_variance=0.85)
        assert m.cumulative_explained >= 0.85
        assert m.k == int(np.searchsorted(np.cumsum(m.all_explained_ratio), 0.85) + 1)

    def test_constant_column(self, rng):
        x = np.column_stack([rng.normal(size=50), np.full(50, 2.0)])
        with pytest.raises(DegeneracyError, match="b"):
            pca_fit(x, columns=["a", "b"], k=1)

    def test_tiny_scale_not_constant(self, rng):
        x = rng.normal(size=(100, 3)) * 1e-13
        pca_fit(x, k=2)

    def test_k_or_threshold(self, rng):
        with pytest.raises(ParameterError):
            pca_fit(rng.normal(size=(20, 2)))

    def test_transform_means_zero(self, rng):
        x = rng.normal(size=(100, 3))
        m = pca_fit(x, k=2)
        np.testing.assert_allclose(pca_transform(m, m.means.reshape(1, -1)), 0.0, atol=1e-14)

    def test_reconstruction(self, rng):
        x = rng.normal(size=(100, 4)) @ rng.normal(size=(4, 4))
        m = pca_fit(x, k=4)
        z = (x - m.means) / m.stds
        np.testing.assert_allclose(pca_transform(m, x) @ m.loadings.T, z, atol=1e-8)

    def test_svd_oracle(self, rng):
        x = rng.normal(size=(150, 4)) @ rng.normal(size=(4, 4))
        m = pca_fit(x, k=3)
        z = (x - x.mean(0)) / x.std(0, ddof=1)
        _, _, vt = np.linalg.svd(z, full_matrices=False)
        ref = z @ vt[:3].T
        got = pca_transform(m, x)
        for c in range(3):
            s = np.sign(ref[:, c] @ got[:, c])
            np.testing.assert_allclose(got[:, c], s * ref[:, c], atol=1e-8)

    def test_shape_mismatch(self, rng):
        m = pca_fit(rng.normal(size=(20, 3)), k=1)
        with pytest.raises(ShapeError):
            pca_transform(m, rng.normal(size=(5, 2)))


class TestCrowding:
    def test_constant_magnitude(self):
        z = np.array([1.0, -1.0, 1.0, -1.0])
        out = crowding_target(z.reshape(-1, 1), CrowdingSpec(1))
        assert np.allclose(out, out[0])

    def test_hand_value(self, rng):
        # pre-standardized columns, then a row sitting at z = (3, 4)
        base = rng.normal(size=(5000, 2))
        base = (base - base.mean(0)) / base.std(0, ddof=1)
        scores = np.vstack([base, [[3.0, 4.0]]])
        out = crowding_target(scores, CrowdingSpec(2))
        zz = (scores - scores.mean(0)) / scores.std(0, ddof=1)
        np.testing.assert_allclose(out, np.sqrt(np.mean(zz ** 2, axis=1)), rtol=1e-12, atol=1e-14)
        assert out[-1] == pytest.approx(math.sqrt(12.5), rel=5e-3)

    def test_zero(self):
        s = np.array([[1.0, 2.0], [-1.0, -2.0], [0.0, 0.0]])
        assert crowding_target(s, CrowdingSpec(2))[2] == 0.0

    def test_sign_flip_invariance(self, rng):
        s = rng.normal(size=(100, 3))
        a = crowding_target(s, CrowdingSpec(3))
        s[:, 1] *= -1
        np.testing.assert_allclose(crowding_target(s, CrowdingSpec(3)), a, rtol=1e-12)

    def test_leave_out(self, rng):
        s = rng.normal(size=(100, 3))
        spec = CrowdingSpec.leave_k_out(3, 1)
        assert spec.leave_out == frozenset({1})
        only = crowding_target(s[:, 1:], CrowdingSpec(2))
        np.testing.assert_allclose(crowding_target(s, spec), only, rtol=1e-12)

    def test_all_excluded(self, rng):
        with pytest.raises(ParameterError):
            crowding_target(rng.normal(size=(10, 1)), CrowdingSpec(1, leave_out=frozenset({1})))

    def test_spec_validation(self):
        with pytest.raises(ParameterError):
            CrowdingSpec(0)
        with pytest.raises(ParameterError):
            CrowdingSpec(2, leave_out=frozenset({3}))
        with pytest.raises(ParameterError):
            CrowdingSpec(2, "rolling")

    def test_rolling_warmup(self, rng):
        out = crowding_target(rng.normal(size=(60, 2)), CrowdingSpec(2, "rolling", 20))
        assert np.isnan(out[:19]).all() and np.isfinite(out[19:]).all()


class TestLegacy:
    def test_constant_return(self):
        c = 0.013
        out = legacy_rv_targets(np.full(40, c), window=10)
        assert out["market_rv14"][13] == pytest.approx(math.sqrt(14) * c, rel=1e-12)
        assert np.isnan(out["market_rv14"][:13]).all()
        assert np.isnan(out["market_rv14_rs"]).all()

    def test_zero(self):
        out = legacy_rv_targets(np.zeros(20), window=5)
        np.testing.assert_array_equal(out["market_rv14"][13:], 0.0)


class TestRiskIndex:
    def test_zero(self):
        out = risk_index(np.zeros((40, 3)), np.zeros((40, 2)), RiskIndexSpec(H=5))
        idx = out["index"]
        np.testing.assert_array_equal(idx[np.isfinite(idx)], 0.0)

    def test_constant_dispersion(self):
        # mean across features alternates so its trailing std is constant
        f = np.tile([[0.0], [1.0]], (30, 1))
        spec = RiskIndexSpec(H=4, feat_window=2, shock_window=2)
        out = risk_index(f, np.zeros((60, 1)), spec)
        c = math.sqrt(0.5)
        idx = out["index"]
        np.testing.assert_allclose(idx[np.isfinite(idx)], c, rtol=1e-12)

    def test_h1(self, rng):
        f = rng.normal(size=(30, 2))
        u = rng.normal(size=(30, 2))
        out = risk_index(f, u, RiskIndexSpec(H=1))
        np.testing.assert_allclose(out["index"], out["dispersion"] + out["intensity"])

    def test_linearity(self, rng):
        f = rng.normal(size=(50, 3))
        u = rng.normal(size=(50, 2))
        a = risk_index(f, u, RiskIndexSpec())["index"]
        b = risk_index(2 * f, 2 * u, RiskIndexSpec())["index"]
        np.testing.assert_allclose(b, 2 * a, rtol=1e-12)

    def test_forward_alignment(self):
        idx = np.arange(20, dtype=float)
        tgt = forward_target(idx, 10)
        np.testing.assert_array_equal(tgt[:10], np.arange(10, 20))
        assert np.isnan(tgt[10:]).all()

    def test_shapes(self):
        with pytest.raises(ShapeError):
            risk_index(np.zeros((5, 1)), np.zeros((4, 1)), RiskIndexSpec())

    def test_spec(self):
        with pytest.raises(ParameterError):
            RiskIndexSpec(H=0)
        with pytest.raises(ParameterError):
            RiskIndexSpec(feat_window=1)


def test_nearest_rank():
    assert nearest_rank(np.arange(1, 101), 0.85) == 85
    assert nearest_rank([3.0, 1.0, 2.0], 0.5) == 2
    assert nearest_rank([5.0], 0.99) == 5

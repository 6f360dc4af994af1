import numpy as np
import pytest

from lvspill import _kernels
from lvspill._kernels import _fallback

compiled = _kernels.BACKENDS.get("compiled")
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def test_active_backend_selected():
    assert _kernels.BACKEND in _kernels.BACKENDS
    assert _kernels.get_backend() is _kernels.BACKENDS[_kernels.BACKEND]
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")


def test_garch_filter_recursion(rng):
    eps = rng.normal(size=50)
    s2 = _fallback.garch11_filter(eps, 0.1, 0.1, 0.8, 1.0)
    ref = [1.0]
    for t in range(1, 50):
        ref.append(0.1 + 0.1 * eps[t - 1] ** 2 + 0.8 * ref[-1])
    np.testing.assert_allclose(s2, ref, rtol=1e-12)


@needs_compiled
def test_garch_equivalence(rng):
    eps = np.ascontiguousarray(rng.normal(size=500))
    for params in [(0.05, 0.1, 0.85, 1.0), (1e-3, 0.2, 0.3, 0.5)]:
        a = _fallback.garch11_nll(eps, *params)
        b = compiled.garch11_nll(eps, *params)
        assert b == pytest.approx(a, rel=1e-12)
        np.testing.assert_allclose(compiled.garch11_filter(eps, *params),
                                   _fallback.garch11_filter(eps, *params), rtol=1e-12)


@needs_compiled
def test_garch_nonpositive(rng):
    eps = np.ascontiguousarray(rng.normal(size=20))
    assert _fallback.garch11_nll(eps, -1.0, 0.0, 0.0, 1.0) == np.inf
    assert compiled.garch11_nll(eps, -1.0, 0.0, 0.0, 1.0) == np.inf


def _split_inputs(rng, n=200, f=4):
    X = rng.normal(size=(n, f))
    X[rng.uniform(size=X.shape) < 0.1] = np.nan
    X[:, -1] = np.round(X[:, -1], 1)
    sorted_idx = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T, dtype=np.int64)
    n_valid = np.isfinite(X).sum(axis=0).astype(np.int64)
    mask = (rng.uniform(size=n) < 0.7).astype(np.uint8)
    g = rng.normal(size=n)
    h = rng.uniform(0.1, 1.0, size=n)
    sel = mask.astype(bool)
    return X, sorted_idx, n_valid, mask, g, h, float(g[sel].sum()), float(h[sel].sum())


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_best_split_equivalence(seed):
    args = _split_inputs(np.random.default_rng(seed))
    for lam, mcw in [(1.0, 1.0), (0.0, 0.5), (5.0, 3.0)]:
        a = _fallback.best_split(*args, lam, mcw)
        b = compiled.best_split(*args, lam, mcw)
        assert a[1:] == b[1:]
        assert b[0] == pytest.approx(a[0], rel=1e-12)


def test_best_split_bruteforce(rng):
    X, si, nv, mask, g, h, G, H = _split_inputs(rng, n=60, f=2)
    gain, feat, thr, dleft = _fallback.best_split(X, si, nv, mask, g, h, G, H, 1.0, 0.0)
    sel = mask.astype(bool)
    parent = G * G / (H + 1.0)
    best = 0.0
    for j in range(2):
        vals = np.unique(X[sel, j][np.isfinite(X[sel, j])])
        for lo, hi in zip(vals[:-1], vals[1:]):
            t = 0.5 * (lo + hi)
            for miss_left in (True, False):
                left = sel & np.where(np.isnan(X[:, j]), miss_left, X[:, j] < t)
                right = sel & ~left
                s = g[left].sum() ** 2 / (h[left].sum() + 1) + g[right].sum() ** 2 / (h[right].sum() + 1) - parent
                best = max(best, s)
    # the kernel sends missing rows to the heavier side rather than trying both
    assert gain <= best + 1e-12
    assert feat in (0, 1)


@needs_compiled
def test_tree_shap_equivalence(rng):
    from lvspill.ml.gbt import GbtParams, gbt_train

    X = rng.normal(size=(200, 5))
    X[::9, 3] = np.nan
    y = X[:, 0] * X[:, 1] + np.nan_to_num(X[:, 3])
    m = gbt_train(np.nan_to_num(X), y, X, y, params=GbtParams(max_depth=3, n_rounds=10, learning_rate=0.5))
    tree = m.trees[0]
    args = (tree.left, tree.right, tree.feature, tree.threshold, tree.default_left, tree.value, tree.cover,
            tree.depth)
    Xc = np.ascontiguousarray(X[:40])
    pa = np.zeros(Xc.shape)
    pb = np.zeros(Xc.shape)
    _fallback.tree_shap(*args, Xc, pa, 0.5)
    compiled.tree_shap(*args, Xc, pb, 0.5)
    np.testing.assert_allclose(pb, pa, atol=1e-12)


def test_env_forces_fallback():
    import os
    import subprocess
    import sys

    env = dict(os.environ, LVSPILL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from lvspill import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"

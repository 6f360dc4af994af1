"""Time the compiled kernels against the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one row per kernel with the best-of-N wall time for each backend
and the speedup. Both backends are run on identical inputs and their
outputs are compared before timing.
"""

import argparse
import timeit

import numpy as np

from lvspill import _kernels
from lvspill.ml.gbt import GbtParams, gbt_train


def _inputs(seed=0):
    rng = np.random.default_rng(seed)
    eps = np.ascontiguousarray(rng.standard_normal(5000))

    n, f = 2000, 12
    X = rng.normal(size=(n, f))
    X[rng.uniform(size=X.shape) < 0.02] = np.nan
    sorted_idx = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T, dtype=np.int64)
    n_valid = np.isfinite(X).sum(axis=0).astype(np.int64)
    mask = np.ones(n, dtype=np.uint8)
    g = rng.normal(size=n)
    h = np.ones(n)
    split_args = (X, sorted_idx, n_valid, mask, g, h, float(g.sum()), float(h.sum()), 1.0, 1.0)

    y = np.nan_to_num(X[:, 0]) * np.nan_to_num(X[:, 1]) + rng.normal(size=n)
    model = gbt_train(X[:1500], y[:1500], X[1500:], y[1500:],
                      params=GbtParams(max_depth=4, n_rounds=1, learning_rate=0.3))
    t = model.trees[0]
    Xs = np.ascontiguousarray(X[:200])
    shap_args = (t.left, t.right, t.feature, t.threshold, t.default_left, t.value, t.cover, t.depth, Xs)
    return eps, split_args, shap_args


def _cases(k, eps, split_args, shap_args):
    def shap():
        phi = np.zeros(shap_args[-1].shape)
        k.tree_shap(*shap_args, phi, 1.0)
        return phi

    return {
        "garch11_nll (T=5000)": lambda: k.garch11_nll(eps, 0.05, 0.1, 0.85, 1.0),
        "best_split (2000x12)": lambda: k.best_split(*split_args),
        "tree_shap (200 rows, depth 4)": shap,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    data = _inputs()
    backends = {name: _cases(mod, *data) for name, mod in sorted(_kernels.BACKENDS.items())}
    if "compiled" not in backends:
        print("compiled extension not built; only the fallback is available")
    names = list(backends["python"])
    print(f"{'kernel':32s} " + " ".join(f"{b:>12s}" for b in backends) + f" {'speedup':>9s}")
    for name in names:
        outs = {b: cases[name]() for b, cases in backends.items()}
        if "compiled" in outs:
            a, c = outs["python"], outs["compiled"]
            if isinstance(a, tuple):
                assert a[1:] == c[1:] and np.isclose(a[0], c[0], rtol=1e-12), name
            else:
                np.testing.assert_allclose(c, a, rtol=1e-10, atol=1e-12, err_msg=name)
        times = {}
        for b, cases in backends.items():
            fn = cases[name]
            n = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
            times[b] = min(timeit.repeat(fn, number=n, repeat=args.repeat)) / n
        speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{name:32s} " + " ".join(f"{times[b] * 1e3:10.3f}ms" for b in backends) + f" {speed:8.1f}x")


if __name__ == "__main__":
    main()

"""Independent reference computations used by the tests.

Each function here is written from the textbook definition with plain loops
or dense linear algebra, deliberately sharing no code with the package.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def rss(y, X):
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    e = y - X @ beta
    return float(e @ e)


def granger_f_bruteforce(x, y, lag):
    """Two-regression F computed row by row."""
    T = len(y)
    rows_u, rows_r, target = [], [], []
    for t in range(lag, T):
        ylags = [y[t - i] for i in range(1, lag + 1)]
        xlags = [x[t - i] for i in range(1, lag + 1)]
        rows_r.append([1.0] + ylags)
        rows_u.append([1.0] + ylags + xlags)
        target.append(y[t])
    yv = np.array(target)
    ru = rss(yv, np.array(rows_u))
    rr = rss(yv, np.array(rows_r))
    df2 = len(yv) - 2 * lag - 1
    return ((rr - ru) / lag) / (ru / df2)


def irf_recursion(coeffs, P, horizons):
    """Phi_0 = I, Phi_h = sum_{i=1..min(h,p)} A_i Phi_{h-i}; IRF_h = Phi_h P."""
    A = np.asarray(coeffs)
    p, n, _ = A.shape
    phi = [np.eye(n)]
    for h in range(1, horizons + 1):
        acc = np.zeros((n, n))
        for i in range(1, min(h, p) + 1):
            acc += A[i - 1] @ phi[h - i]
        phi.append(acc)
    return np.stack([f @ P for f in phi])


def fevd_from_irf(irf):
    H, n, _ = irf.shape
    out = np.zeros((H, n, n))
    for h in range(H):
        for i in range(n):
            tot = sum(irf[s, i, j] ** 2 for s in range(h + 1) for j in range(n))
            for j in range(n):
                out[h, i, j] = sum(irf[s, i, j] ** 2 for s in range(h + 1)) / tot
    return out


def pagerank_dense(adj, damping=0.85):
    """Solve (I - d P) s = (1 - d)/n 1 with dangling columns uniform."""
    A = np.asarray(adj, dtype=float)
    n = A.shape[0]
    P = np.zeros((n, n))
    for i in range(n):
        deg = A[i].sum()
        for j in range(n):
            P[j, i] = A[i, j] / deg if deg > 0 else 1.0 / n
    s = np.linalg.solve(np.eye(n) - damping * P, np.full(n, (1 - damping) / n))
    return s / s.sum()


def hc0_sandwich(X, e):
    """(X'X)^-1 (sum_t e_t^2 x_t x_t') (X'X)^-1 by explicit summation."""
    k = X.shape[1]
    meat = np.zeros((k, k))
    for t in range(X.shape[0]):
        meat += e[t] ** 2 * np.outer(X[t], X[t])
    bread = np.linalg.inv(X.T @ X)
    return bread @ meat @ bread


def bartlett_hac(X, e, L):
    k = X.shape[1]
    T = X.shape[0]
    S = np.zeros((k, k))
    for t in range(T):
        S += e[t] ** 2 * np.outer(X[t], X[t])
    for l in range(1, L + 1):
        w = 1 - l / (L + 1)
        G = np.zeros((k, k))
        for t in range(l, T):
            G += e[t] * e[t - l] * np.outer(X[t], X[t - l])
        S += w * (G + G.T)
    bread = np.linalg.inv(X.T @ X)
    return bread @ S @ bread


def bh_bruteforce(p):
    m = len(p)
    q = []
    for i in range(m):
        # q_i = min over all j with p_j >= p_i of p_j m / rank_j
        ranks = sorted(range(m), key=lambda k: (p[k], k))
        rank_of = {k: r + 1 for r, k in enumerate(ranks)}
        q.append(min(1.0, min(p[j] * m / rank_of[j] for j in range(m) if rank_of[j] >= rank_of[i])))
    return q


def tree_value_conditional(tree, x, S):
    """E[f(x) | x_S] under the tree's cover distribution (path-dependent)."""
    def rec(node):
        if tree.left[node] < 0:
            return tree.value[node]
        f = tree.feature[node]
        l, r = tree.left[node], tree.right[node]
        if f in S:
            v = x[f]
            if math.isnan(v):
                go_left = bool(tree.default_left[node])
            else:
                go_left = v < tree.threshold[node]
            return rec(l if go_left else r)
        cl, cr = tree.cover[l], tree.cover[r]
        return (cl * rec(l) + cr * rec(r)) / (cl + cr)

    return rec(0)


def shapley_bruteforce(tree, x, n_features):
    """Exact Shapley values by enumerating all feature subsets."""
    phi = np.zeros(n_features)
    feats = list(range(n_features))
    cache = {}

    def v(S):
        key = frozenset(S)
        if key not in cache:
            cache[key] = tree_value_conditional(tree, x, key)
        return cache[key]

    M = n_features
    for i in feats:
        others = [f for f in feats if f != i]
        for r in range(M):
            w = math.factorial(r) * math.factorial(M - r - 1) / math.factorial(M)
            for S in itertools.combinations(others, r):
                phi[i] += w * (v(set(S) | {i}) - v(S))
    return phi


def best_f1_bruteforce(scores, labels):
    """Largest F1 over every threshold that changes the prediction set."""
    s = np.asarray(scores, float)
    lab = np.asarray(labels, int)
    best = -1.0
    cands = sorted(set(s.tolist())) + [np.inf]
    for tau in cands:
        pred = s >= tau
        tp = int(np.sum(pred & (lab == 1)))
        fp = int(np.sum(pred & (lab == 0)))
        fn = int(np.sum(~pred & (lab == 1)))
        f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
        best = max(best, f1)
    return best

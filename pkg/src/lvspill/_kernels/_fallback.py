"""Pure numpy/scipy implementations of the hot kernels.

Every function here has a twin with the same signature in the compiled
``_ckernels`` extension. The two must agree to floating-point tolerance;
``tests/test_kernels.py`` runs both.
"""

import math

import numpy as np
from scipy.signal import lfilter

LOG_2PI = math.log(2.0 * math.pi)


def garch11_filter(eps, omega, alpha, beta, sigma2_0):
    """Conditional variances of a GARCH(1,1) with ``sigma2[0] = sigma2_0``."""
    eps = np.asarray(eps, dtype=np.float64)
    n = eps.shape[0]
    out = np.empty(n)
    if n == 0:
        return out
    out[0] = sigma2_0
    if n > 1:
        drive = omega + alpha * eps[:-1] ** 2
        # out[t] - beta * out[t-1] = drive[t-1], seeded with out[0]
        out[1:], _ = lfilter([1.0], [1.0, -beta], drive, zi=[beta * sigma2_0])
    return out


def garch11_nll(eps, omega, alpha, beta, sigma2_0):
    """Gaussian negative log-likelihood of a GARCH(1,1)."""
    s2 = garch11_filter(eps, omega, alpha, beta, sigma2_0)
    if not np.all(s2 > 0):
        return math.inf
    eps = np.asarray(eps, dtype=np.float64)
    return 0.5 * float(np.sum(LOG_2PI + np.log(s2) + eps * eps / s2))


def best_split(X, sorted_idx, n_valid, node_mask, g, h, g_tot, h_tot,
               reg_lambda, min_child_weight):
    """Exact greedy split search for one tree node.

    Parameters
    ----------
    X : (n, f) float64
    sorted_idx : (f, n) int64
        Per-feature row order by ascending value; missing rows sit at the end.
    n_valid : (f,) int64
        Number of non-missing rows per feature.
    node_mask : (n,) uint8
        1 for rows in the node.
    g, h : (n,) float64
        Gradients and hessians.
    g_tot, h_tot : float
        Sums of ``g`` and ``h`` over the node, including missing rows.

    Returns
    -------
    (gain, feature, threshold, default_left)
        ``feature == -1`` when no split has positive gain. ``gain`` is the
        doubled structure-score improvement (without the 1/2 factor).
    """
    best_gain = 0.0
    best_feat = -1
    best_thr = 0.0
    best_left = True
    parent = g_tot * g_tot / (h_tot + reg_lambda)
    mask = node_mask.astype(bool)
    for j in range(X.shape[1]):
        rows = sorted_idx[j, : n_valid[j]]
        rows = rows[mask[rows]]
        if rows.shape[0] < 2:
            continue
        xs = X[rows, j]
        gl = np.cumsum(g[rows])
        hl = np.cumsum(h[rows])
        g_nm = gl[-1]
        h_nm = hl[-1]
        g_miss = g_tot - g_nm
        h_miss = h_tot - h_nm
        cand = np.nonzero(xs[:-1] < xs[1:])[0]
        if cand.shape[0] == 0:
            continue
        GL = gl[cand]
        HL = hl[cand]
        GR = g_nm - GL
        HR = h_nm - HL
        left = HL >= HR
        GL = np.where(left, GL + g_miss, GL)
        HL = np.where(left, HL + h_miss, HL)
        GR = np.where(left, GR, GR + g_miss)
        HR = np.where(left, HR, HR + h_miss)
        gain = GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - parent
        ok = (HL >= min_child_weight) & (HR >= min_child_weight)
        gain = np.where(ok, gain, -np.inf)
        k = int(np.argmax(gain))
        if gain[k] > best_gain:
            best_gain = float(gain[k])
            best_feat = j
            lo = xs[cand[k]]
            hi = xs[cand[k] + 1]
            thr = 0.5 * (lo + hi)
            if thr <= lo:
                thr = hi
            best_thr = float(thr)
            best_left = bool(left[k])
    return best_gain, best_feat, best_thr, best_left


# TreeSHAP path bookkeeping.  A path is stored as four parallel arrays
# (feature, zero fraction, one fraction, permutation weight) inside one
# preallocated buffer; each recursion level owns a slice of it.

def _extend(feat, zf, of, pw, base, depth, pz, po, pi):
    feat[base + depth] = pi
    zf[base + depth] = pz
    of[base + depth] = po
    pw[base + depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[base + i + 1] += po * pw[base + i] * (i + 1) / (depth + 1)
        pw[base + i] = pz * pw[base + i] * (depth - i) / (depth + 1)


def _unwind(feat, zf, of, pw, base, depth, idx):
    one = of[base + idx]
    zero = zf[base + idx]
    nxt = pw[base + depth]
    for i in range(depth - 1, -1, -1):
        if one != 0.0:
            tmp = pw[base + i]
            pw[base + i] = nxt * (depth + 1) / ((i + 1) * one)
            nxt = tmp - pw[base + i] * zero * (depth - i) / (depth + 1)
        else:
            pw[base + i] = pw[base + i] * (depth + 1) / (zero * (depth - i))
    for i in range(idx, depth):
        feat[base + i] = feat[base + i + 1]
        zf[base + i] = zf[base + i + 1]
        of[base + i] = of[base + i + 1]


def _unwound_sum(zf, of, pw, base, depth, idx):
    one = of[base + idx]
    zero = zf[base + idx]
    nxt = pw[base + depth]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one != 0.0:
            tmp = nxt * (depth + 1) / ((i + 1) * one)
            total += tmp
            nxt = pw[base + i] - tmp * zero * ((depth - i) / (depth + 1))
        elif zero != 0.0:
            total += (pw[base + i] / zero) / ((depth - i) / (depth + 1))
    return total


def _shap_recurse(tree, x, phi, buf, node, depth, parent_base, pz, po, pi):
    left, right, feature, threshold, default_left, value, cover = tree
    feat, zf, of, pw = buf
    base = parent_base + depth + 1
    n = depth + 1
    feat[base:base + n] = feat[parent_base:parent_base + n]
    zf[base:base + n] = zf[parent_base:parent_base + n]
    of[base:base + n] = of[parent_base:parent_base + n]
    pw[base:base + n] = pw[parent_base:parent_base + n]
    _extend(feat, zf, of, pw, base, depth, pz, po, pi)

    if left[node] < 0:
        v = value[node]
        for i in range(1, depth + 1):
            w = _unwound_sum(zf, of, pw, base, depth, i)
            phi[feat[base + i]] += w * (of[base + i] - zf[base + i]) * v
        return

    split = feature[node]
    xv = x[split]
    if xv != xv:
        hot_left = bool(default_left[node])
    else:
        hot_left = xv < threshold[node]
    hot = left[node] if hot_left else right[node]
    cold = right[node] if hot_left else left[node]
    w = cover[node]
    hot_zero = cover[hot] / w
    cold_zero = cover[cold] / w
    inc_zero = 1.0
    inc_one = 1.0
    for k in range(depth + 1):
        if feat[base + k] == split:
            inc_zero = zf[base + k]
            inc_one = of[base + k]
            _unwind(feat, zf, of, pw, base, depth, k)
            depth -= 1
            break
    _shap_recurse(tree, x, phi, buf, hot, depth + 1, base, hot_zero * inc_zero, inc_one, split)
    _shap_recurse(tree, x, phi, buf, cold, depth + 1, base, cold_zero * inc_zero, 0.0, split)


def shap_buffer_size(max_depth):
    return (max_depth + 2) * (max_depth + 3) // 2 + 1


def tree_shap(left, right, feature, threshold, default_left, value, cover,
              max_depth, X, phi, scale):
    """Add ``scale`` times the exact TreeSHAP values of one tree into ``phi``.

    Node ``i`` is a leaf when ``left[i] < 0``. Rows of ``X`` go left when
    ``x < threshold`` and follow ``default_left`` when missing.
    """
    size = shap_buffer_size(max_depth)
    tree = (left, right, feature, threshold, default_left, value, cover)
    n, f = X.shape
    row_phi = np.zeros(f)
    feat = np.full(size, -1, dtype=np.int64)
    zf = np.zeros(size)
    of = np.zeros(size)
    pw = np.zeros(size)
    buf = (feat, zf, of, pw)
    for r in range(n):
        row_phi[:] = 0.0
        _shap_recurse(tree, X[r], row_phi, buf, 0, 0, 0, 1.0, 1.0, -1)
        phi[r, :] += scale * row_phi

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_fallback.py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, M_PI, INFINITY, isnan

cnp.import_array()


def garch11_filter(const double[::1] eps, double omega, double alpha, double beta,
                   double sigma2_0):
    cdef Py_ssize_t n = eps.shape[0], t
    out = np.empty(n)
    cdef double[::1] s2 = out
    if n == 0:
        return out
    s2[0] = sigma2_0
    with nogil:
        for t in range(1, n):
            s2[t] = omega + alpha * eps[t - 1] * eps[t - 1] + beta * s2[t - 1]
    return out


def garch11_nll(const double[::1] eps, double omega, double alpha, double beta,
                double sigma2_0):
    cdef Py_ssize_t n = eps.shape[0], t
    cdef double s2 = sigma2_0, total = 0.0, l2pi = log(2.0 * M_PI)
    if n == 0:
        return 0.0
    with nogil:
        for t in range(n):
            if t > 0:
                s2 = omega + alpha * eps[t - 1] * eps[t - 1] + beta * s2
            if not s2 > 0.0:
                total = INFINITY
                break
            total += l2pi + log(s2) + eps[t] * eps[t] / s2
    return 0.5 * total


def best_split(const double[:, ::1] X, const cnp.int64_t[:, ::1] sorted_idx,
               const cnp.int64_t[::1] n_valid, const cnp.uint8_t[::1] node_mask,
               const double[::1] g, const double[::1] h, double g_tot, double h_tot,
               double reg_lambda, double min_child_weight):
    cdef Py_ssize_t f = X.shape[1], j, k, r, prev
    cdef double best_gain = 0.0, best_thr = 0.0, thr, lo, hi
    cdef Py_ssize_t best_feat = -1
    cdef bint best_left = True, left
    cdef double parent = g_tot * g_tot / (h_tot + reg_lambda)
    cdef double gl, hl, g_nm, h_nm, g_miss, h_miss, GL, HL, GR, HR, gain
    cdef Py_ssize_t count
    with nogil:
        for j in range(f):
            # first pass: totals over non-missing node rows
            g_nm = 0.0
            h_nm = 0.0
            count = 0
            for k in range(n_valid[j]):
                r = sorted_idx[j, k]
                if node_mask[r]:
                    g_nm += g[r]
                    h_nm += h[r]
                    count += 1
            if count < 2:
                continue
            g_miss = g_tot - g_nm
            h_miss = h_tot - h_nm
            gl = 0.0
            hl = 0.0
            prev = -1
            for k in range(n_valid[j]):
                r = sorted_idx[j, k]
                if not node_mask[r]:
                    continue
                if prev >= 0 and X[prev, j] < X[r, j]:
                    GL = gl
                    HL = hl
                    GR = g_nm - GL
                    HR = h_nm - HL
                    left = HL >= HR
                    if left:
                        GL = GL + g_miss
                        HL = HL + h_miss
                    else:
                        GR = GR + g_miss
                        HR = HR + h_miss
                    if HL >= min_child_weight and HR >= min_child_weight:
                        gain = GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - parent
                        if gain > best_gain:
                            best_gain = gain
                            best_feat = j
                            lo = X[prev, j]
                            hi = X[r, j]
                            thr = 0.5 * (lo + hi)
                            if thr <= lo:
                                thr = hi
                            best_thr = thr
                            best_left = left
                gl += g[r]
                hl += h[r]
                prev = r
    return best_gain, best_feat, best_thr, bool(best_left)


cdef inline void _extend(cnp.int64_t* feat, double* zf, double* of, double* pw,
                         Py_ssize_t depth, double pz, double po, cnp.int64_t pi) noexcept nogil:
    cdef Py_ssize_t i
    feat[depth] = pi
    zf[depth] = pz
    of[depth] = po
    pw[depth] = 1.0 if depth == 0 else 0.0
    i = depth - 1
    while i >= 0:
        pw[i + 1] += po * pw[i] * (i + 1) / <double>(depth + 1)
        pw[i] = pz * pw[i] * (depth - i) / <double>(depth + 1)
        i -= 1


cdef inline void _unwind(cnp.int64_t* feat, double* zf, double* of, double* pw,
                         Py_ssize_t depth, Py_ssize_t idx) noexcept nogil:
    cdef double one = of[idx], zero = zf[idx], nxt = pw[depth], tmp
    cdef Py_ssize_t i = depth - 1
    while i >= 0:
        if one != 0.0:
            tmp = pw[i]
            pw[i] = nxt * (depth + 1) / ((i + 1) * one)
            nxt = tmp - pw[i] * zero * (depth - i) / <double>(depth + 1)
        else:
            pw[i] = pw[i] * (depth + 1) / (zero * (depth - i))
        i -= 1
    for i in range(idx, depth):
        feat[i] = feat[i + 1]
        zf[i] = zf[i + 1]
        of[i] = of[i + 1]


cdef inline double _unwound_sum(double* zf, double* of, double* pw,
                                Py_ssize_t depth, Py_ssize_t idx) noexcept nogil:
    cdef double one = of[idx], zero = zf[idx], nxt = pw[depth], total = 0.0, tmp
    cdef Py_ssize_t i = depth - 1
    while i >= 0:
        if one != 0.0:
            tmp = nxt * (depth + 1) / ((i + 1) * one)
            total += tmp
            nxt = pw[i] - tmp * zero * ((depth - i) / <double>(depth + 1))
        elif zero != 0.0:
            total += (pw[i] / zero) / ((depth - i) / <double>(depth + 1))
        i -= 1
    return total


cdef struct Tree:
    const cnp.int64_t* left
    const cnp.int64_t* right
    const cnp.int64_t* feature
    const double* threshold
    const cnp.uint8_t* default_left
    const double* value
    const double* cover


cdef void _recurse(Tree* t, const double* x, double* phi,
                   cnp.int64_t* feat, double* zf, double* of, double* pw,
                   Py_ssize_t node, Py_ssize_t depth, Py_ssize_t parent_base,
                   double pz, double po, cnp.int64_t pi) noexcept nogil:
    cdef Py_ssize_t base = parent_base + depth + 1, i, k
    cdef double w, v, xv, hot_zero, cold_zero, inc_zero = 1.0, inc_one = 1.0
    cdef cnp.int64_t split, hot, cold
    cdef bint hot_left
    for i in range(depth + 1):
        feat[base + i] = feat[parent_base + i]
        zf[base + i] = zf[parent_base + i]
        of[base + i] = of[parent_base + i]
        pw[base + i] = pw[parent_base + i]
    _extend(feat + base, zf + base, of + base, pw + base, depth, pz, po, pi)

    if t.left[node] < 0:
        v = t.value[node]
        for i in range(1, depth + 1):
            w = _unwound_sum(zf + base, of + base, pw + base, depth, i)
            phi[feat[base + i]] += w * (of[base + i] - zf[base + i]) * v
        return

    split = t.feature[node]
    xv = x[split]
    if isnan(xv):
        hot_left = t.default_left[node] != 0
    else:
        hot_left = xv < t.threshold[node]
    if hot_left:
        hot = t.left[node]
        cold = t.right[node]
    else:
        hot = t.right[node]
        cold = t.left[node]
    w = t.cover[node]
    hot_zero = t.cover[hot] / w
    cold_zero = t.cover[cold] / w
    for k in range(depth + 1):
        if feat[base + k] == split:
            inc_zero = zf[base + k]
            inc_one = of[base + k]
            _unwind(feat + base, zf + base, of + base, pw + base, depth, k)
            depth -= 1
            break
    _recurse(t, x, phi, feat, zf, of, pw, hot, depth + 1, base,
             hot_zero * inc_zero, inc_one, split)
    _recurse(t, x, phi, feat, zf, of, pw, cold, depth + 1, base,
             cold_zero * inc_zero, 0.0, split)


def shap_buffer_size(Py_ssize_t max_depth):
    return (max_depth + 2) * (max_depth + 3) // 2 + 1


def tree_shap(const cnp.int64_t[::1] left, const cnp.int64_t[::1] right,
              const cnp.int64_t[::1] feature, const double[::1] threshold,
              const cnp.uint8_t[::1] default_left, const double[::1] value,
              const double[::1] cover, Py_ssize_t max_depth,
              const double[:, ::1] X, double[:, ::1] phi, double scale):
    cdef Py_ssize_t size = shap_buffer_size(max_depth)
    cdef Py_ssize_t n = X.shape[0], f = X.shape[1], r, j
    cdef Tree t
    feat_arr = np.full(size, -1, dtype=np.int64)
    zf_arr = np.zeros(size)
    of_arr = np.zeros(size)
    pw_arr = np.zeros(size)
    row_arr = np.zeros(f)
    cdef cnp.int64_t[::1] feat = feat_arr
    cdef double[::1] zf = zf_arr, of = of_arr, pw = pw_arr, row = row_arr
    if n == 0:
        return
    t.left = &left[0]
    t.right = &right[0]
    t.feature = &feature[0]
    t.threshold = &threshold[0]
    t.default_left = &default_left[0]
    t.value = &value[0]
    t.cover = &cover[0]
    with nogil:
        for r in range(n):
            for j in range(f):
                row[j] = 0.0
            _recurse(&t, &X[r, 0], &row[0], &feat[0], &zf[0], &of[0], &pw[0],
                     0, 0, 0, 1.0, 1.0, -1)
            for j in range(f):
                phi[r, j] += scale * row[j]

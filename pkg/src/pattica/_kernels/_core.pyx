# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in `_pyref`.

Same signatures and the same accumulation order element by element, so
`count_ones`, `kmeans_assign`, `tree_predict` and `shap_tree` reproduce the
reference results bit for bit. `sum_grad_hess` sums floats in plain loop
order while the reference goes through BLAS; those two may differ in the
last ulps.
"""

import numpy as np

NAME = "compiled"


def count_ones(const unsigned char[:, ::1] Z, const long long[:] idx,
               const int[:] y, const long long[:] cand, int n_classes):
    """Class counts over rows `idx` restricted to Z[:, cand] == 1."""
    cdef Py_ssize_t m = cand.shape[0]
    cdef Py_ssize_t n = idx.shape[0]
    out_arr = np.zeros((m, n_classes), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, r
    cdef int cls
    for i in range(n):
        r = <Py_ssize_t> idx[i]
        cls = y[r]
        for j in range(m):
            if Z[r, cand[j]]:
                out[j, cls] += 1
    return out_arr


def sum_grad_hess(const unsigned char[:, ::1] Z, const long long[:] idx,
                  const double[:] g, const double[:] h, const long long[:] cand):
    """Per-candidate sums of gradient/hessian and row counts where Z == 1."""
    cdef Py_ssize_t m = cand.shape[0]
    cdef Py_ssize_t n = idx.shape[0]
    s1g_arr = np.zeros(m, dtype=np.float64)
    s1h_arr = np.zeros(m, dtype=np.float64)
    cnt_arr = np.zeros(m, dtype=np.int64)
    cdef double[::1] s1g = s1g_arr
    cdef double[::1] s1h = s1h_arr
    cdef long long[::1] cnt = cnt_arr
    cdef Py_ssize_t i, j, r
    for i in range(n):
        r = <Py_ssize_t> idx[i]
        for j in range(m):
            if Z[r, cand[j]]:
                s1g[j] += g[r]
                s1h[j] += h[r]
                cnt[j] += 1
    return s1g_arr, s1h_arr, cnt_arr


def kmeans_assign(const double[:, ::1] Y, const double[:, ::1] G):
    """Nearest-centroid labels and squared distances, ties to the lowest index."""
    cdef Py_ssize_t n = Y.shape[0]
    cdef Py_ssize_t d = Y.shape[1]
    cdef Py_ssize_t K = G.shape[0]
    labels_arr = np.zeros(n, dtype=np.int32)
    d2_arr = np.zeros(n, dtype=np.float64)
    cdef int[::1] labels = labels_arr
    cdef double[::1] d2 = d2_arr
    cdef Py_ssize_t i, j, k, bestk
    cdef double acc, best, diff
    with nogil:
        for i in range(n):
            bestk = 0
            best = 0.0
            for k in range(K):
                acc = 0.0
                for j in range(d):
                    diff = Y[i, j] - G[k, j]
                    acc += diff * diff
                if k == 0 or acc < best:
                    best = acc
                    bestk = k
            labels[i] = <int> bestk
            d2[i] = best
    return labels_arr, d2_arr


def tree_predict(const int[:] feature, const int[:] left, const int[:] right,
                 const double[:, ::1] values, const unsigned char[:, ::1] X):
    """Leaf scores of a single tree for every row of X (binary features)."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t C = values.shape[1]
    out_arr = np.empty((n, C), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, c
    cdef int node, f
    for i in range(n):
        node = 0
        f = feature[0]
        while f >= 0:
            if X[i, f] == 0:
                node = left[node]
            else:
                node = right[node]
            f = feature[node]
        for c in range(C):
            out[i, c] = values[node, c]
    return out_arr


cdef void _shap_walk(const int[:] feature, const int[:] left, const int[:] right,
                     const double[:, ::1] values, const unsigned char[:] x,
                     const unsigned char[:] brow, const int[:] col_var,
                     const double[:, ::1] ain, const double[:, ::1] aout,
                     double[:, ::1] phi, double[:] base, signed char[:] state,
                     int node, int a, int dd) noexcept:
    cdef int f = feature[node]
    cdef Py_ssize_t C = values.shape[1]
    cdef Py_ssize_t n_vars = phi.shape[0]
    cdef Py_ssize_t v, c
    cdef double coef_in, coef_out
    cdef int xv, bv, nxt
    if f < 0:
        if a == 0:
            for c in range(C):
                base[c] += values[node, c]
        if a or dd:
            coef_in = ain[a, dd]
            coef_out = aout[a, dd]
            for v in range(n_vars):
                if state[v] == 1:
                    for c in range(C):
                        phi[v, c] += values[node, c] * coef_in
                elif state[v] == 2:
                    for c in range(C):
                        phi[v, c] -= values[node, c] * coef_out
        return
    xv = x[f]
    bv = brow[f]
    if xv == bv:
        nxt = left[node] if xv == 0 else right[node]
        _shap_walk(feature, left, right, values, x, brow, col_var, ain, aout,
                   phi, base, state, nxt, a, dd)
        return
    v = col_var[f]
    if state[v] == 1:
        nxt = left[node] if xv == 0 else right[node]
        _shap_walk(feature, left, right, values, x, brow, col_var, ain, aout,
                   phi, base, state, nxt, a, dd)
    elif state[v] == 2:
        nxt = left[node] if bv == 0 else right[node]
        _shap_walk(feature, left, right, values, x, brow, col_var, ain, aout,
                   phi, base, state, nxt, a, dd)
    else:
        state[v] = 1
        nxt = left[node] if xv == 0 else right[node]
        _shap_walk(feature, left, right, values, x, brow, col_var, ain, aout,
                   phi, base, state, nxt, a + 1, dd)
        state[v] = 2
        nxt = left[node] if bv == 0 else right[node]
        _shap_walk(feature, left, right, values, x, brow, col_var, ain, aout,
                   phi, base, state, nxt, a, dd + 1)
        state[v] = 0


def shap_tree(const int[:] feature, const int[:] left, const int[:] right,
              const double[:, ::1] values, const unsigned char[:] x,
              const unsigned char[:, ::1] bg, const int[:] col_var,
              const double[:, ::1] ain, const double[:, ::1] aout,
              double[:, ::1] phi, double[:] base):
    """Accumulate one tree's exact Shapley contributions over all background rows.

    See the reference implementation for the subcube decomposition this
    mirrors; additions land in `phi`/`base` in the same DFS order.
    """
    cdef Py_ssize_t n_vars = phi.shape[0]
    state_arr = np.zeros(n_vars, dtype=np.int8)
    cdef signed char[:] state = state_arr
    cdef Py_ssize_t b
    for b in range(bg.shape[0]):
        _shap_walk(feature, left, right, values, x, bg[b], col_var, ain, aout,
                   phi, base, state, 0, 0, 0)

"""Pure-Python/numpy reference implementations of the hot kernels.

These are the import-time fallback when the compiled extension is missing and
the ground truth the extension is tested against. Integer-count kernels and the
k-means/Shapley kernels accumulate in exactly the same order as the compiled
code and agree bit-for-bit; `sum_grad_hess` aggregates floats through BLAS and
may differ from the compiled loop in the last ulps (boosting trees can then
split differently on near-ties, which is why cross-backend tests compare
boosted models at the behavior level, not node-for-node).
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def count_ones(Z, idx, y, cand, n_classes):
    """Class counts over rows `idx` restricted to Z[:, cand] == 1.

    Returns (len(cand), n_classes) int64.
    """
    Zi = Z[np.ix_(idx, cand)].astype(np.float64)
    onehot = np.zeros((len(idx), n_classes), dtype=np.float64)
    onehot[np.arange(len(idx)), y[idx]] = 1.0
    return (Zi.T @ onehot).astype(np.int64)


def sum_grad_hess(Z, idx, g, h, cand):
    """Per-candidate sums of gradient/hessian and row counts where Z == 1."""
    Zi = Z[np.ix_(idx, cand)].astype(np.float64)
    s1g = Zi.T @ g[idx]
    s1h = Zi.T @ h[idx]
    cnt1 = Zi.sum(axis=0).astype(np.int64)
    return s1g, s1h, cnt1


def kmeans_assign(Y, G):
    """Nearest-centroid labels and squared distances, ties to the lowest index.

    Squared distances accumulate dimension by dimension so the compiled kernel
    reproduces the same floats.
    """
    n, d = Y.shape
    K = G.shape[0]
    dist = np.zeros((n, K), dtype=np.float64)
    for j in range(d):
        diff = Y[:, j, None] - G[None, :, j]
        dist += diff * diff
    labels = np.argmin(dist, axis=1).astype(np.int32)
    return labels, dist[np.arange(n), labels]


def tree_predict(feature, left, right, values, X):
    """Leaf scores of a single tree for every row of X (binary features)."""
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int32)
    active = feature[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        cur = node[rows]
        goes_left = X[rows, feature[cur]] == 0
        node[rows] = np.where(goes_left, left[cur], right[cur])
        active = feature[node] >= 0
    return values[node]


def shap_tree(feature, left, right, values, x, bg, col_var, ain, aout, phi, base):
    """Accumulate one tree's exact Shapley contributions over all background rows.

    For each background row the coalition space splits into subcubes, one per
    reachable leaf: walking the tree, a node whose column agrees between `x`
    and the background row has a single reachable branch; a disagreeing column
    constrains its variable to be taken from `x` (the x-side branch) or from
    the background (the other). Each leaf therefore contributes `value *
    indicator(A ⊆ S, D ∩ S = ∅)` to the value function, whose Shapley values
    are the precomputed `ain`/`aout` coefficients. Additions into `phi`/`base`
    happen in DFS order; the compiled kernel replicates them exactly.
    """
    n_vars = phi.shape[0]
    state = np.zeros(n_vars, dtype=np.int8)  # 0 free, 1 forced-in, 2 forced-out

    def walk(node, brow, a, dd):
        f = feature[node]
        if f < 0:
            w = values[node]
            if a == 0:
                base[...] += w
            if a or dd:
                coef_in = ain[a, dd]
                coef_out = aout[a, dd]
                for v in range(n_vars):
                    if state[v] == 1:
                        phi[v] += w * coef_in
                    elif state[v] == 2:
                        phi[v] -= w * coef_out
            return
        xv = x[f]
        bv = brow[f]
        if xv == bv:
            walk(left[node] if xv == 0 else right[node], brow, a, dd)
            return
        v = col_var[f]
        if state[v] == 1:
            walk(left[node] if xv == 0 else right[node], brow, a, dd)
        elif state[v] == 2:
            walk(left[node] if bv == 0 else right[node], brow, a, dd)
        else:
            state[v] = 1
            walk(left[node] if xv == 0 else right[node], brow, a + 1, dd)
            state[v] = 2
            walk(left[node] if bv == 0 else right[node], brow, a, dd + 1)
            state[v] = 0

    for b in range(bg.shape[0]):
        walk(0, bg[b], 0, 0)

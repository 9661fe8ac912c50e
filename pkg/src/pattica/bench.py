"""Side-by-side timing of the compiled and pure-Python kernel backends.

Run as ``python -m pattica.bench``. Each kernel is exercised on a
representative workload; the reported time is the best of --repeats
runs. Results are cross-checked between backends before timing so a
speedup never hides a divergence (the gradient/hessian reduction is
compared within a small tolerance; see its docstring for why).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ._kernels import available_backends, get_backend
from .shap import _coefficient_tables


def _random_tree(rng, n_cols: int, depth: int, n_outputs: int):
    """Complete binary tree with random split columns and leaf values."""
    n_nodes = 2 ** (depth + 1) - 1
    feature = np.full(n_nodes, -1, dtype=np.int32)
    left = np.full(n_nodes, -1, dtype=np.int32)
    right = np.full(n_nodes, -1, dtype=np.int32)
    values = np.zeros((n_nodes, n_outputs))
    first_leaf = 2**depth - 1
    for i in range(first_leaf):
        feature[i] = rng.integers(0, n_cols)
        left[i] = 2 * i + 1
        right[i] = 2 * i + 2
    values[first_leaf:] = rng.normal(size=(n_nodes - first_leaf, n_outputs))
    return feature, left, right, values


def _workloads(scale: float):
    rng = np.random.default_rng(20240817)
    n = int(20000 * scale)
    J = 48
    Z = (rng.random((n, J)) < 0.25).astype(np.uint8)
    idx = np.sort(rng.choice(n, size=int(n * 0.63), replace=False)).astype(np.int64)
    y = rng.integers(0, 3, size=n).astype(np.int32)
    cand = np.sort(rng.choice(J, size=7, replace=False)).astype(np.int64)
    g = rng.normal(size=n)
    h = rng.random(n) + 0.1

    Y = rng.normal(size=(n, 6))
    G = rng.normal(size=(8, 6))

    feature, left, right, values = _random_tree(rng, J, 10, 3)

    M = 10
    col_var = np.repeat(np.arange(M, dtype=np.int32), J // M + 1)[:J].copy()
    sf, sl, sr, sv = _random_tree(rng, J, 6, 1)
    x = (rng.random(J) < 0.25).astype(np.uint8)
    bg = (rng.random((100, J)) < 0.25).astype(np.uint8)
    ain, aout = _coefficient_tables(M)

    def bench_count_ones(mod):
        return mod.count_ones(Z, idx, y, cand, 3)

    def bench_sum_grad_hess(mod):
        return mod.sum_grad_hess(Z, idx, g, h, cand)

    def bench_kmeans_assign(mod):
        return mod.kmeans_assign(Y, G)

    def bench_tree_predict(mod):
        return mod.tree_predict(feature, left, right, values, Z)

    def bench_shap_tree(mod):
        phi = np.zeros((M, 1))
        base = np.zeros(1)
        mod.shap_tree(sf, sl, sr, sv, x, bg, col_var, ain, aout, phi, base)
        return phi, base

    return [
        ("count_ones", bench_count_ones, "exact"),
        ("sum_grad_hess", bench_sum_grad_hess, "close"),
        ("kmeans_assign", bench_kmeans_assign, "exact"),
        ("tree_predict", bench_tree_predict, "exact"),
        ("shap_tree", bench_shap_tree, "exact"),
    ]


def _check(name: str, mode: str, got, want) -> None:
    got = got if isinstance(got, tuple) else (got,)
    want = want if isinstance(want, tuple) else (want,)
    for a, b in zip(got, want):
        if mode == "exact":
            if not np.array_equal(np.asarray(a), np.asarray(b)):
                raise AssertionError(f"{name}: backends disagree")
        else:
            if not np.allclose(a, b, rtol=1e-12, atol=1e-12):
                raise AssertionError(f"{name}: backends diverge beyond tolerance")


def _time(fn, mod, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(mod)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m pattica.bench",
        description="compare the compiled and pure-Python kernel backends",
    )
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--scale", type=float, default=1.0,
                        help="multiplier on the default row counts")
    args = parser.parse_args(argv)

    names = available_backends()
    print(f"backends available: {', '.join(names)}")
    if "compiled" not in names:
        print("compiled extension not built; timing the python backend only")
    mods = [(n, get_backend(n)) for n in names]

    rows = []
    for kernel, fn, mode in _workloads(args.scale):
        outputs = [fn(mod) for _, mod in mods]
        for (bname, _), out in zip(mods[1:], outputs[1:]):
            _check(kernel, mode, out, outputs[0])
        times = {bname: _time(fn, mod, args.repeats) for bname, mod in mods}
        rows.append((kernel, times))

    width = max(len(r[0]) for r in rows)
    header = f"{'kernel':<{width}}" + "".join(f"{n:>14}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for kernel, times in rows:
        line = f"{kernel:<{width}}"
        for n in names:
            line += f"{times[n] * 1e3:>12.2f}ms"
        if len(names) == 2:
            line += f"{times['python'] / times['compiled']:>9.1f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

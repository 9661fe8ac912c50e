"""Exact Shapley attribution of tree-ensemble predictions.

Players are whole variables (a variable's one-hot block toggles as a
unit). The value function is interventional: v(S) averages, over an
explicit background set, the model output on hybrid rows that take the
variables in S from the explained row and the rest from the background
row. Forests are explained in probability space; boosting models in
additive margin (log-odds) space, where tree-wise linearity is exact.

Rather than enumerating all 2^M coalitions, each (tree, background row)
pair partitions the coalition lattice into subcubes, one per reachable
leaf: walking down the tree, a column that agrees between x and the
background row forces a single branch, and a disagreeing column
constrains its variable to "from x" on one branch and "from background"
on the other. A leaf reached with a forced-in set A and forced-out set D
contributes value * [A subset of S, D disjoint from S], whose Shapley
weight depends only on (|A|, |D|); those coefficients are precomputed
exactly from factorial ratios.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial

import numpy as np

from . import _kernels
from .dataset import IndicatorMatrix
from .ensembles import TreeEnsemble, predict_proba
from .errors import DataError
from .seeding import substream

MAX_PLAYERS = 20


@dataclass(frozen=True)
class BackgroundSet:
    """Reference rows defining what "variable absent" means."""

    rows: np.ndarray  # (m, J) uint8
    seed: int | None = None
    source: str = ""

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.uint8)
        object.__setattr__(self, "rows", rows)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise DataError("background needs at least one row")

    @property
    def size(self) -> int:
        return self.rows.shape[0]


def sample_background(
    Z_rows: np.ndarray, size: int, seed: int, *key: int, source: str = ""
) -> BackgroundSet:
    """Draw up to `size` distinct rows from a pool, order-stable in the pool."""
    pool = np.asarray(Z_rows)
    if pool.shape[0] <= size:
        picked = pool
    else:
        rng = substream(seed, "shap-bg", *key)
        sel = np.sort(rng.choice(pool.shape[0], size=size, replace=False))
        picked = pool[sel]
    return BackgroundSet(rows=picked, seed=seed, source=source)


@dataclass(frozen=True)
class ShapExplanation:
    classes: tuple[str, ...]
    base_values: np.ndarray  # (C,)
    phi: np.ndarray  # (n, M, C)
    predicted_class: np.ndarray  # (n,) int codes into classes
    feature_names: tuple[str, ...]
    feature_order: tuple[int, ...]  # variable indices by mean |phi| descending
    mean_abs: np.ndarray  # (M,) the ordering statistic
    class_mode: str
    space: str  # "probability" | "margin"
    bg_seed: int | None
    bg_size: int

    @property
    def n_rows(self) -> int:
        return self.phi.shape[0]

    def predicted_labels(self) -> list[str]:
        return [self.classes[c] for c in self.predicted_class]

    def sidecar_json(self) -> str:
        return json.dumps(
            {
                "classes": list(self.classes),
                "base_values": self.base_values.tolist(),
                "feature_order": [self.feature_names[i] for i in self.feature_order],
                "class_mode": self.class_mode,
                "space": self.space,
                "background": {"seed": self.bg_seed, "size": self.bg_size},
            },
            indent=2,
        )


def _coefficient_tables(M: int) -> tuple[np.ndarray, np.ndarray]:
    """Shapley weights for a leaf subcube with a forced-in and dd forced-out.

    For a forced-in variable the contribution sums W(|S|) over coalitions
    containing the other a-1 forced-in variables, none of the dd forced-out
    ones, and any subset of the remaining free variables; analogously for
    forced-out. Computed in exact rational arithmetic.
    """
    fact = [factorial(i) for i in range(M + 1)]

    def W(s: int) -> Fraction:
        return Fraction(fact[s] * fact[M - s - 1], fact[M])

    ain = np.zeros((M + 1, M + 1))
    aout = np.zeros((M + 1, M + 1))
    for a in range(M + 1):
        for dd in range(M + 1 - a):
            free = M - a - dd
            if a >= 1:
                ain[a, dd] = float(
                    sum(Fraction(comb(free, r)) * W(a - 1 + r) for r in range(free + 1))
                )
            if dd >= 1:
                aout[a, dd] = float(
                    sum(Fraction(comb(free, r)) * W(a + r) for r in range(free + 1))
                )
    return ain, aout


def _validate(model: TreeEnsemble, width: int) -> None:
    M = len(model.var_names)
    if M > MAX_PLAYERS:
        raise DataError(
            f"{M} variables exceed the exact-enumeration budget of {MAX_PLAYERS}; "
            "a sampling approximation is out of scope"
        )
    if width != model.n_columns:
        raise DataError(f"row width {width} does not match model width {model.n_columns}")


def exact_shap(
    model: TreeEnsemble, x: np.ndarray, bg: BackgroundSet
) -> tuple[np.ndarray, np.ndarray]:
    """Exact per-variable, per-class Shapley values and base values for one row.

    Returns (phi, base) with phi of shape (M, C); phi.sum(axis=0) + base
    reproduces the model output on x (probabilities for a forest, margins
    for boosting) up to accumulated rounding.
    """
    x = np.ascontiguousarray(x, dtype=np.uint8)
    if x.ndim != 1:
        raise DataError("exact_shap explains a single row")
    _validate(model, x.shape[0])
    if bg.rows.shape[1] != model.n_columns:
        raise DataError("background width does not match model")

    M = len(model.var_names)
    C = model.n_classes
    col_var = model.col_var()
    ain, aout = _coefficient_tables(M)

    if model.kind == "random-forest":
        phi = np.zeros((M, C))
        base = np.zeros(C)
        for tree in model.trees:
            _kernels.shap_tree(tree.feature, tree.left, tree.right, tree.values,
                               x, bg.rows, col_var, ain, aout, phi, base)
        scale = len(model.trees) * bg.size
        return phi / scale, base / scale

    phi = np.zeros((M, C))
    base = model.init_margin.copy()
    phi_c = np.zeros((M, 1))
    base_c = np.zeros(1)
    for i, tree in enumerate(model.trees):
        phi_c[:] = 0.0
        base_c[:] = 0.0
        _kernels.shap_tree(tree.feature, tree.left, tree.right, tree.values,
                           x, bg.rows, col_var, ain, aout, phi_c, base_c)
        c = i % C
        phi[:, c] += phi_c[:, 0] / bg.size
        base[c] += base_c[0] / bg.size
    return phi, base


def shap_summary(
    model: TreeEnsemble,
    rows: np.ndarray | IndicatorMatrix,
    bg: BackgroundSet,
    class_mode: str = "predicted-class",
) -> ShapExplanation:
    """Shapley values for a slice of rows plus the beeswarm bookkeeping.

    Feature order is by mean |phi| descending: across all classes in
    "per-class" mode, across each row's predicted class in
    "predicted-class" mode.
    """
    if class_mode not in ("per-class", "predicted-class"):
        raise DataError(f"unknown class_mode {class_mode!r}")
    R = rows.Z if isinstance(rows, IndicatorMatrix) else np.asarray(rows)
    R = np.ascontiguousarray(np.atleast_2d(R), dtype=np.uint8)
    if R.shape[0] < 1:
        raise DataError("no rows to explain")
    _validate(model, R.shape[1])

    n = R.shape[0]
    M = len(model.var_names)
    C = model.n_classes
    phi = np.zeros((n, M, C))
    base = None
    for i in range(n):
        phi[i], b = exact_shap(model, R[i], bg)
        if base is None:
            base = b
    predicted = predict_proba(model, R).argmax(axis=1).astype(np.int32)

    if class_mode == "per-class":
        mean_abs = np.abs(phi).mean(axis=(0, 2))
    else:
        picked = phi[np.arange(n), :, predicted]  # (n, M)
        mean_abs = np.abs(picked).mean(axis=0)
    order = tuple(int(i) for i in np.argsort(-mean_abs, kind="stable"))

    space = "probability" if model.kind == "random-forest" else "margin"
    return ShapExplanation(
        classes=model.classes,
        base_values=base,
        phi=phi,
        predicted_class=predicted,
        feature_names=model.var_names,
        feature_order=order,
        mean_abs=mean_abs,
        class_mode=class_mode,
        space=space,
        bg_seed=bg.seed,
        bg_size=bg.size,
    )

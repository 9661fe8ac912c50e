"""Tree ensembles over one-hot features: forests for screening, boosting for severity.

Both families train on the binary indicator columns of an IndicatorMatrix,
aggregate per-column importances to whole variables, and serialize to JSON
so explanations can re-load a model without retraining. Random forests
carry class-probability leaves; gradient boosting carries additive
log-odds leaves plus a per-class initial margin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dataset import CategoricalDataset, IndicatorMatrix, indicator
from .errors import DataError
from .seeding import subseed, substream


@dataclass(frozen=True)
class Tree:
    """Flat array form of one binary decision tree.

    feature[i] < 0 marks a leaf; otherwise feature[i] is the indicator
    column tested at node i, with value 0 routed to left[i] and value 1
    to right[i]. values[i] holds the leaf scores (every node has a row,
    internal rows are zeros).
    """

    feature: np.ndarray  # (nodes,) int32
    left: np.ndarray  # (nodes,) int32
    right: np.ndarray  # (nodes,) int32
    values: np.ndarray  # (nodes, C) float64


@dataclass(frozen=True)
class TreeEnsemble:
    kind: str  # "random-forest" | "gradient-boosting"
    trees: tuple[Tree, ...]
    classes: tuple[str, ...]
    importances: np.ndarray  # (n_variables,) nonnegative, sums to 1 when any split occurred
    var_names: tuple[str, ...]
    blocks: tuple[tuple[int, int], ...]
    n_columns: int
    hyperparams: dict = field(default_factory=dict)
    init_margin: np.ndarray | None = None  # (C,) gradient-boosting only
    degenerate: bool = False

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def col_var(self) -> np.ndarray:
        """Map of indicator column index to owning variable index."""
        out = np.zeros(self.n_columns, dtype=np.int32)
        for v, (a, b) in enumerate(self.blocks):
            out[a:b] = v
        return out


class _TreeBuilder:
    def __init__(self, n_classes: int):
        self.feature: list[int] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.values: list[np.ndarray] = []
        self.C = n_classes

    def add(self) -> int:
        self.feature.append(-1)
        self.left.append(-1)
        self.right.append(-1)
        self.values.append(np.zeros(self.C))
        return len(self.feature) - 1

    def finish(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            values=np.asarray(self.values, dtype=np.float64).reshape(len(self.feature), self.C),
        )


def _gini(counts: np.ndarray, totals: np.ndarray) -> np.ndarray:
    # counts (..., C) int64, totals (...) float; empty children get impurity 0
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / totals[..., None]
        imp = 1.0 - (p * p).sum(axis=-1)
    return np.where(totals > 0, imp, 0.0)


def _as_idx(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def _grow_rf(
    builder: _TreeBuilder,
    Z: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    counts: np.ndarray,
    depth: int,
    max_depth: int,
    min_leaf: int,
    m_try: int,
    rng: np.random.Generator,
    gains: np.ndarray,
) -> int:
    node = builder.add()
    n_node = idx.shape[0]
    n_pos = int((counts > 0).sum())
    if depth >= max_depth or n_node < 2 * min_leaf or n_pos <= 1:
        builder.values[node] = counts / n_node
        return node
    J = Z.shape[1]
    cand = np.sort(rng.choice(J, size=min(m_try, J), replace=False)).astype(np.int64)
    c1 = _kernels.count_ones(Z, idx, y, cand, counts.shape[0])
    n1 = c1.sum(axis=1)
    n0 = n_node - n1
    c0 = counts[None, :] - c1
    imp_parent = float(_gini(counts[None, :], np.array([float(n_node)]))[0])
    child = (n1 * _gini(c1, n1.astype(np.float64)) + n0 * _gini(c0, n0.astype(np.float64))) / n_node
    gain = imp_parent - child
    gain[(n1 < min_leaf) | (n0 < min_leaf)] = -1.0
    best = int(np.argmax(gain))
    if gain[best] <= 0.0:
        builder.values[node] = counts / n_node
        return node
    col = int(cand[best])
    mask = Z[idx, col] == 1
    gains[col] += n_node * gain[best]
    builder.feature[node] = col
    left = _grow_rf(builder, Z, y, _as_idx(idx[~mask]), c0[best], depth + 1,
                    max_depth, min_leaf, m_try, rng, gains)
    right = _grow_rf(builder, Z, y, _as_idx(idx[mask]), c1[best], depth + 1,
                     max_depth, min_leaf, m_try, rng, gains)
    builder.left[node] = left
    builder.right[node] = right
    builder.values[node] = counts / n_node
    return node


def train_random_forest(
    X: IndicatorMatrix,
    y: np.ndarray,
    classes: tuple[str, ...],
    n_trees: int = 200,
    max_depth: int = 12,
    min_leaf: int = 5,
    feature_subsample: int | None = None,
    seed: int = 0,
) -> TreeEnsemble:
    """Bootstrap forest of Gini-gain CART trees with probability leaves.

    Importance of a variable is its node-count-weighted impurity decrease,
    summed over the variable's indicator columns and normalized to 1.
    """
    Z = np.ascontiguousarray(X.Z, dtype=np.uint8)
    y = np.ascontiguousarray(y, dtype=np.int32)
    n, J = Z.shape
    if n < 2:
        raise DataError("need at least 2 observations to train")
    C = len(classes)
    if C < 2:
        raise DataError("need at least 2 classes")
    m_try = feature_subsample if feature_subsample else max(1, int(round(np.sqrt(J))))
    degenerate = np.unique(y).size < 2

    gains = np.zeros(J, dtype=np.float64)
    trees = []
    for t in range(n_trees):
        rng = substream(seed, "trees", t)
        idx = _as_idx(rng.integers(0, n, n))
        counts = np.bincount(y[idx], minlength=C).astype(np.int64)
        builder = _TreeBuilder(C)
        _grow_rf(builder, Z, y, idx, counts, 0, max_depth, min_leaf, m_try, rng, gains)
        trees.append(builder.finish())

    return TreeEnsemble(
        kind="random-forest",
        trees=tuple(trees),
        classes=tuple(classes),
        importances=_aggregate_importance(gains, X.blocks),
        var_names=X.var_names,
        blocks=X.blocks,
        n_columns=J,
        hyperparams={
            "n_trees": n_trees, "max_depth": max_depth, "min_leaf": min_leaf,
            "feature_subsample": m_try, "seed": seed,
        },
        degenerate=degenerate,
    )


def _grow_gb(
    builder: _TreeBuilder,
    Z: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    idx: np.ndarray,
    g_tot: float,
    h_tot: float,
    depth: int,
    max_depth: int,
    min_leaf: int,
    lam: float,
    lr: float,
    cand: np.ndarray,
    gains: np.ndarray,
) -> int:
    node = builder.add()
    n_node = idx.shape[0]
    if depth >= max_depth or n_node < 2 * min_leaf:
        builder.values[node] = np.array([-lr * g_tot / (h_tot + lam)])
        return node
    s1g, s1h, cnt1 = _kernels.sum_grad_hess(Z, idx, g, h, cand)
    cnt0 = n_node - cnt1
    s0g = g_tot - s1g
    s0h = h_tot - s1h
    gain = 0.5 * (
        s1g * s1g / (s1h + lam) + s0g * s0g / (s0h + lam) - g_tot * g_tot / (h_tot + lam)
    )
    gain[(cnt1 < min_leaf) | (cnt0 < min_leaf)] = -1.0
    best = int(np.argmax(gain))
    if gain[best] <= 0.0:
        builder.values[node] = np.array([-lr * g_tot / (h_tot + lam)])
        return node
    col = int(cand[best])
    mask = Z[idx, col] == 1
    gains[col] += gain[best]
    builder.feature[node] = col
    left = _grow_gb(builder, Z, g, h, _as_idx(idx[~mask]), float(s0g[best]), float(s0h[best]),
                    depth + 1, max_depth, min_leaf, lam, lr, cand, gains)
    right = _grow_gb(builder, Z, g, h, _as_idx(idx[mask]), float(s1g[best]), float(s1h[best]),
                     depth + 1, max_depth, min_leaf, lam, lr, cand, gains)
    builder.left[node] = left
    builder.right[node] = right
    return node


def train_gradient_boosting(
    X: IndicatorMatrix,
    y: np.ndarray,
    classes: tuple[str, ...],
    n_rounds: int = 100,
    max_depth: int = 4,
    learning_rate: float = 0.1,
    min_leaf: int = 5,
    reg_lambda: float = 1.0,
    seed: int = 0,
) -> TreeEnsemble:
    """Multiclass Newton boosting: one tree per class per round, softmax link.

    Leaves hold learning-rate-scaled Newton steps, so a prediction is the
    initial log-prior margin plus the sum of leaf values, mapped through
    softmax. Importance of a variable is its total split gain. The seed
    is accepted for interface symmetry; training itself draws nothing.
    """
    Z = np.ascontiguousarray(X.Z, dtype=np.uint8)
    y = np.ascontiguousarray(y, dtype=np.int32)
    n, J = Z.shape
    if n < 2:
        raise DataError("need at least 2 observations to train")
    C = len(classes)
    if C < 2:
        raise DataError("need at least 2 classes")
    degenerate = np.unique(y).size < 2

    prior = np.bincount(y, minlength=C) / n
    init = np.log(np.clip(prior, 1e-12, None))
    onehot = np.zeros((n, C), dtype=np.float64)
    onehot[np.arange(n), y] = 1.0

    F = np.tile(init, (n, 1))
    cand = np.arange(J, dtype=np.int64)
    all_idx = _as_idx(np.arange(n))
    gains = np.zeros(J, dtype=np.float64)
    trees = []
    for _ in range(n_rounds):
        expF = np.exp(F - F.max(axis=1, keepdims=True))
        P = expF / expF.sum(axis=1, keepdims=True)
        for c in range(C):
            g = np.ascontiguousarray(P[:, c] - onehot[:, c])
            h = np.ascontiguousarray(P[:, c] * (1.0 - P[:, c]))
            builder = _TreeBuilder(1)
            _grow_gb(builder, Z, g, h, all_idx, float(g.sum()), float(h.sum()),
                     0, max_depth, min_leaf, reg_lambda, learning_rate, cand, gains)
            tree = builder.finish()
            trees.append(tree)
            F[:, c] += _kernels.tree_predict(tree.feature, tree.left, tree.right, tree.values, Z)[:, 0]

    return TreeEnsemble(
        kind="gradient-boosting",
        trees=tuple(trees),
        classes=tuple(classes),
        importances=_aggregate_importance(gains, X.blocks),
        var_names=X.var_names,
        blocks=X.blocks,
        n_columns=J,
        hyperparams={
            "n_rounds": n_rounds, "max_depth": max_depth, "learning_rate": learning_rate,
            "min_leaf": min_leaf, "reg_lambda": reg_lambda, "seed": seed,
        },
        init_margin=init,
        degenerate=degenerate,
    )


def _aggregate_importance(gains: np.ndarray, blocks: tuple[tuple[int, int], ...]) -> np.ndarray:
    per_var = np.array([gains[a:b].sum() for a, b in blocks])
    total = per_var.sum()
    return per_var / total if total > 0 else per_var


def _as_rows(model: TreeEnsemble, X: np.ndarray) -> tuple[np.ndarray, bool]:
    X = np.asarray(X)
    single = X.ndim == 1
    rows = np.ascontiguousarray(np.atleast_2d(X), dtype=np.uint8)
    if rows.shape[1] != model.n_columns:
        raise DataError(
            f"input width {rows.shape[1]} does not match model width {model.n_columns}"
        )
    return rows, single


def decision_margin(model: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    """Per-class additive score before the probability link (boosting only)."""
    if model.kind != "gradient-boosting":
        raise DataError("margins are defined for gradient-boosting models")
    rows, single = _as_rows(model, X)
    C = model.n_classes
    F = np.tile(model.init_margin, (rows.shape[0], 1))
    for i, tree in enumerate(model.trees):
        out = _kernels.tree_predict(tree.feature, tree.left, tree.right, tree.values, rows)
        F[:, i % C] += out[:, 0]
    return F[0] if single else F


def predict_proba(model: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    """Per-class probabilities for one indicator row or a stack of rows."""
    rows, single = _as_rows(model, X)
    if model.kind == "random-forest":
        acc = np.zeros((rows.shape[0], model.n_classes))
        for tree in model.trees:
            acc += _kernels.tree_predict(tree.feature, tree.left, tree.right, tree.values, rows)
        probs = acc / len(model.trees)
    else:
        F = decision_margin(model, rows)
        expF = np.exp(F - F.max(axis=1, keepdims=True))
        probs = expF / expF.sum(axis=1, keepdims=True)
    return probs[0] if single else probs


@dataclass
class ScreeningReport:
    fold_count: int
    seed: int
    rule: str
    entries: list[dict] = field(default_factory=list)
    degenerate: bool = False

    def selected(self) -> list[str]:
        return [e["name"] for e in self.entries if e["selected"]]

    def to_json(self) -> str:
        return json.dumps(
            {
                "fold_count": self.fold_count,
                "seed": self.seed,
                "rule": self.rule,
                "degenerate": self.degenerate,
                "variables": self.entries,
            },
            indent=2,
        )


def _stratified_folds(y: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    """Round-robin deal of per-class shuffled rows; returns held-out index sets."""
    assignments = np.zeros(y.shape[0], dtype=np.int64)
    for cls in np.unique(y):
        rows = np.nonzero(y == cls)[0]
        rows = rows[substream(seed, "screening", int(cls)).permutation(rows.size)]
        assignments[rows] = np.arange(rows.size) % folds
    return [np.nonzero(assignments == f)[0] for f in range(folds)]


def consensus_select(
    ds: CategoricalDataset,
    target: str,
    folds: int = 5,
    rf_params: dict | None = None,
    gb_params: dict | None = None,
    seed: int = 0,
    rule: str = "averaged",
) -> ScreeningReport:
    """Variables that both model families consistently rank as informative.

    Stratified k-fold training yields per-fold normalized importances for a
    forest and a boosting model. Under the default "averaged" rule a
    variable is selected iff its fold-averaged score is strictly above the
    median in BOTH families; "per-fold" instead requires an above-median
    score in a majority of folds in both families.
    """
    if folds < 2:
        raise DataError("need at least 2 folds")
    if rule not in ("averaged", "per-fold"):
        raise DataError(f"unknown consensus rule {rule!r}")
    names = ds.schema.names
    if target not in names:
        raise DataError(f"target {target!r} not in the dataset")
    candidates = [v for v in names if v != target]
    if not candidates:
        raise DataError("no candidate variables besides the target")

    t_col = ds.schema.index_of(target)
    y = np.ascontiguousarray(ds.codes[:, t_col], dtype=np.int32)
    classes = ds.schema.variable(target).categories
    Z_full = indicator(ds, candidates)

    held_out = _stratified_folds(y, folds, seed)
    rf_scores = np.zeros((folds, len(candidates)))
    gb_scores = np.zeros((folds, len(candidates)))
    degenerate = False
    for f, test_rows in enumerate(held_out):
        train_mask = np.ones(ds.n, dtype=bool)
        train_mask[test_rows] = False
        y_tr = y[train_mask]
        missing = set(range(len(classes))) - set(np.unique(y_tr).tolist())
        present = set(np.unique(y).tolist())
        if missing & present:
            raise DataError(
                f"fold {f} lost target class(es) {sorted(missing & present)} from its "
                "training part; use fewer folds"
            )
        X_tr = IndicatorMatrix(
            Z=np.ascontiguousarray(Z_full.Z[train_mask]),
            blocks=Z_full.blocks,
            var_names=Z_full.var_names,
            categories=Z_full.categories,
        )
        rf = train_random_forest(
            X_tr, y_tr, classes, seed=subseed(seed, "screening", f, 0), **(rf_params or {})
        )
        gb = train_gradient_boosting(
            X_tr, y_tr, classes, seed=subseed(seed, "screening", f, 1), **(gb_params or {})
        )
        degenerate = degenerate or rf.degenerate or gb.degenerate
        rf_scores[f] = rf.importances
        gb_scores[f] = gb.importances

    rf_mean = rf_scores.mean(axis=0)
    gb_mean = gb_scores.mean(axis=0)
    if rule == "averaged":
        rf_cut = np.median(rf_mean)
        gb_cut = np.median(gb_mean)
        chosen = (rf_mean > rf_cut) & (gb_mean > gb_cut)
    else:
        need = (folds + 1) // 2
        rf_votes = (rf_scores > np.median(rf_scores, axis=1, keepdims=True)).sum(axis=0)
        gb_votes = (gb_scores > np.median(gb_scores, axis=1, keepdims=True)).sum(axis=0)
        chosen = (rf_votes >= need) & (gb_votes >= need)

    entries = [
        {
            "name": name,
            "rf_score_mean": float(rf_mean[i]),
            "gb_score_mean": float(gb_mean[i]),
            "rf_scores": [float(s) for s in rf_scores[:, i]],
            "gb_scores": [float(s) for s in gb_scores[:, i]],
            "selected": bool(chosen[i]),
        }
        for i, name in enumerate(candidates)
    ]
    return ScreeningReport(
        fold_count=folds, seed=seed, rule=rule, entries=entries, degenerate=degenerate
    )


def model_to_json(model: TreeEnsemble) -> str:
    """Loss-free JSON form of an ensemble (floats round-trip exactly)."""
    payload = {
        "kind": model.kind,
        "classes": list(model.classes),
        "var_names": list(model.var_names),
        "blocks": [list(b) for b in model.blocks],
        "n_columns": model.n_columns,
        "importances": model.importances.tolist(),
        "hyperparams": model.hyperparams,
        "init_margin": model.init_margin.tolist() if model.init_margin is not None else None,
        "degenerate": model.degenerate,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "values": t.values.tolist(),
            }
            for t in model.trees
        ],
    }
    return json.dumps(payload)


def model_from_json(text: str) -> TreeEnsemble:
    d = json.loads(text)
    trees = tuple(
        Tree(
            feature=np.asarray(t["feature"], dtype=np.int32),
            left=np.asarray(t["left"], dtype=np.int32),
            right=np.asarray(t["right"], dtype=np.int32),
            values=np.asarray(t["values"], dtype=np.float64).reshape(len(t["feature"]), -1),
        )
        for t in d["trees"]
    )
    return TreeEnsemble(
        kind=d["kind"],
        trees=trees,
        classes=tuple(d["classes"]),
        importances=np.asarray(d["importances"], dtype=np.float64),
        var_names=tuple(d["var_names"]),
        blocks=tuple((a, b) for a, b in d["blocks"]),
        n_columns=d["n_columns"],
        hyperparams=d["hyperparams"],
        init_margin=np.asarray(d["init_margin"], dtype=np.float64)
        if d["init_margin"] is not None
        else None,
        degenerate=d["degenerate"],
    )

"""Forest and boosting trainers, prediction, screening, serialization."""

import numpy as np
import pytest

from conftest import make_dataset
from pattica.dataset import indicator
from pattica.ensembles import (
    consensus_select,
    decision_margin,
    model_from_json,
    model_to_json,
    predict_proba,
    train_gradient_boosting,
    train_random_forest,
)
from pattica.errors import DataError


def _xor_free_data(rng, n=200, noise_vars=3):
    """Target equals V1's category; the remaining variables are noise."""
    y = rng.integers(0, 2, size=n).astype(np.int32)
    codes = np.column_stack(
        [y] + [rng.integers(0, 3, size=n) for _ in range(noise_vars)]
    )
    ds = make_dataset(codes, [2] + [3] * noise_vars)
    return indicator(ds), y


def test_rf_perfect_split_gives_pure_leaves(rng):
    Z, y = _xor_free_data(rng)
    model = train_random_forest(Z, y, ("lo", "hi"), n_trees=5, max_depth=1,
                                feature_subsample=Z.Z.shape[1], seed=3)
    # a depth-1 tree on a perfectly separating column yields exact 0/1 leaves
    probs = predict_proba(model, Z.Z)
    assert np.array_equal(probs[:, 1], y.astype(np.float64))
    # every split lands in V1's block, so it absorbs all the importance
    assert model.importances[0] == 1.0
    assert np.all(model.importances[1:] == 0.0)


def test_rf_probability_rows_sum_to_one(rng):
    Z, y = _xor_free_data(rng)
    model = train_random_forest(Z, y, ("lo", "hi"), n_trees=20, seed=0)
    probs = predict_proba(model, Z.Z)
    assert probs.shape == (Z.n, 2)
    assert np.all(probs >= 0)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_rf_deterministic_per_seed(rng):
    Z, y = _xor_free_data(rng)
    a = train_random_forest(Z, y, ("lo", "hi"), n_trees=8, seed=11)
    b = train_random_forest(Z, y, ("lo", "hi"), n_trees=8, seed=11)
    c = train_random_forest(Z, y, ("lo", "hi"), n_trees=8, seed=12)
    assert model_to_json(a) == model_to_json(b)
    assert model_to_json(a) != model_to_json(c)


def test_rf_feature_subsample_default_is_sqrt(rng):
    Z, y = _xor_free_data(rng)
    J = Z.Z.shape[1]
    auto = train_random_forest(Z, y, ("lo", "hi"), n_trees=2, seed=0)
    full = train_random_forest(Z, y, ("lo", "hi"), n_trees=2,
                               feature_subsample=J, seed=0)
    assert auto.hyperparams["feature_subsample"] == max(1, round(np.sqrt(J)))
    assert full.hyperparams["feature_subsample"] == J


def test_constant_variable_importance_is_zero(rng):
    n = 150
    y = rng.integers(0, 2, size=n).astype(np.int32)
    codes = np.column_stack([y, np.zeros(n, dtype=np.int32),
                             rng.integers(0, 3, size=n)])
    ds = make_dataset(codes, [2, 2, 3])  # V2 never leaves its first category
    Z = indicator(ds)
    rf = train_random_forest(Z, y, ("lo", "hi"), n_trees=10, seed=1,
                             feature_subsample=Z.Z.shape[1])
    gb = train_gradient_boosting(Z, y, ("lo", "hi"), n_rounds=10, seed=1)
    assert rf.importances[1] == 0.0
    assert gb.importances[1] == 0.0


def test_rf_degenerate_flag(rng):
    Z, _ = _xor_free_data(rng, n=40)
    y = np.zeros(40, dtype=np.int32)
    model = train_random_forest(Z, y, ("lo", "hi"), n_trees=3, seed=0)
    assert model.degenerate
    assert np.all(model.importances == 0.0)  # nothing can split a pure node
    probs = predict_proba(model, Z.Z)
    assert np.array_equal(probs[:, 0], np.ones(40))


def test_trainers_reject_tiny_input(rng):
    Z, y = _xor_free_data(rng, n=10)
    one = indicator(make_dataset(np.zeros((1, 2), dtype=np.int32), 2))
    with pytest.raises(DataError):
        train_random_forest(one, np.zeros(1, dtype=np.int32), ("a", "b"))
    with pytest.raises(DataError):
        train_gradient_boosting(one, np.zeros(1, dtype=np.int32), ("a", "b"))
    with pytest.raises(DataError):
        train_random_forest(Z, y, ("only",), n_trees=2)


def test_gb_zero_learning_rate_keeps_priors(rng):
    Z, y = _xor_free_data(rng)
    prior = np.bincount(y, minlength=2) / y.size
    model = train_gradient_boosting(Z, y, ("lo", "hi"), n_rounds=5,
                                    learning_rate=0.0, seed=0)
    probs = predict_proba(model, Z.Z)
    assert np.allclose(probs, prior[None, :], atol=1e-12)


def _logloss(probs, y):
    return -np.mean(np.log(np.clip(probs[np.arange(y.size), y], 1e-15, None)))


def test_gb_training_logloss_decreases(rng):
    Z, y = _xor_free_data(rng, n=300)
    losses = []
    for rounds in (2, 8, 30):
        model = train_gradient_boosting(Z, y, ("lo", "hi"), n_rounds=rounds,
                                        max_depth=2, seed=0)
        losses.append(_logloss(predict_proba(model, Z.Z), y))
    assert losses[0] > losses[1] > losses[2]


def test_gb_staged_logloss_non_increasing(rng):
    from pattica import _kernels

    Z, y = _xor_free_data(rng, n=300)
    model = train_gradient_boosting(Z, y, ("lo", "hi"), n_rounds=25,
                                    max_depth=2, seed=0)
    C = model.n_classes
    rows = np.ascontiguousarray(Z.Z, dtype=np.uint8)
    F = np.tile(model.init_margin, (Z.n, 1))
    losses = []
    for i, tree in enumerate(model.trees):
        out = _kernels.tree_predict(tree.feature, tree.left, tree.right,
                                    tree.values, rows)
        F[:, i % C] += out[:, 0]
        if i % C == C - 1:  # a full boosting round just finished
            expF = np.exp(F - F.max(axis=1, keepdims=True))
            losses.append(_logloss(expF / expF.sum(axis=1, keepdims=True), y))
    assert len(losses) == 25
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_gb_masters_separable_toy_within_50_rounds(rng):
    Z, y = _xor_free_data(rng, n=200)
    model = train_gradient_boosting(Z, y, ("lo", "hi"), n_rounds=50,
                                    max_depth=3, seed=0)
    probs = predict_proba(model, Z.Z)
    assert np.array_equal(probs.argmax(axis=1), y)


def test_gb_seed_is_inert(rng):
    Z, y = _xor_free_data(rng)
    a = train_gradient_boosting(Z, y, ("lo", "hi"), n_rounds=6, seed=1)
    b = train_gradient_boosting(Z, y, ("lo", "hi"), n_rounds=6, seed=99)
    for ta, tb in zip(a.trees, b.trees):
        assert np.array_equal(ta.values, tb.values)
        assert np.array_equal(ta.feature, tb.feature)


def test_gb_margin_softmax_agrees_with_proba(rng):
    Z, y = _xor_free_data(rng)
    model = train_gradient_boosting(Z, y, ("lo", "hi"), n_rounds=8, seed=0)
    F = decision_margin(model, Z.Z)
    expF = np.exp(F - F.max(axis=1, keepdims=True))
    assert np.array_equal(predict_proba(model, Z.Z),
                          expF / expF.sum(axis=1, keepdims=True))


def test_margin_requires_boosting(rng):
    Z, y = _xor_free_data(rng, n=40)
    rf = train_random_forest(Z, y, ("lo", "hi"), n_trees=2, seed=0)
    with pytest.raises(DataError):
        decision_margin(rf, Z.Z)


def test_predict_rejects_width_mismatch(rng):
    Z, y = _xor_free_data(rng, n=40)
    rf = train_random_forest(Z, y, ("lo", "hi"), n_trees=2, seed=0)
    with pytest.raises(DataError):
        predict_proba(rf, np.zeros(Z.Z.shape[1] + 1, dtype=np.uint8))


def test_single_row_prediction_matches_batch(rng):
    Z, y = _xor_free_data(rng, n=60)
    for model in (
        train_random_forest(Z, y, ("lo", "hi"), n_trees=6, seed=0),
        train_gradient_boosting(Z, y, ("lo", "hi"), n_rounds=6, seed=0),
    ):
        batch = predict_proba(model, Z.Z)
        assert np.array_equal(predict_proba(model, Z.Z[7]), batch[7])


@pytest.mark.parametrize("family", ["random-forest", "gradient-boosting"])
def test_model_json_round_trip_is_exact(rng, family):
    Z, y = _xor_free_data(rng, n=80)
    if family == "random-forest":
        model = train_random_forest(Z, y, ("lo", "hi"), n_trees=4, seed=5)
    else:
        model = train_gradient_boosting(Z, y, ("lo", "hi"), n_rounds=4, seed=5)
    back = model_from_json(model_to_json(model))
    assert back.kind == model.kind
    assert back.classes == model.classes
    assert back.var_names == model.var_names
    assert back.blocks == model.blocks
    assert np.array_equal(back.importances, model.importances)
    assert np.array_equal(predict_proba(back, Z.Z), predict_proba(model, Z.Z))


def _screening_dataset(rng, n=240):
    """V1 mirrors the target, V2 is correlated, V3..V6 are noise."""
    y = rng.integers(0, 3, size=n).astype(np.int32)
    v2 = np.where(rng.random(n) < 0.8, y, rng.integers(0, 3, size=n))
    codes = np.column_stack(
        [y, v2] + [rng.integers(0, 3, size=n) for _ in range(4)] + [y]
    )
    names = [f"V{j + 1}" for j in range(6)] + ["severity"]
    return make_dataset(codes, 3, target="severity", names=names)


@pytest.mark.parametrize("rule", ["averaged", "per-fold"])
def test_consensus_selects_informative_variables(rng, rule):
    ds = _screening_dataset(rng)
    report = consensus_select(ds, "severity", folds=4, seed=7, rule=rule,
                              rf_params={"n_trees": 30},
                              gb_params={"n_rounds": 20})
    assert report.rule == rule
    assert report.fold_count == 4
    assert not report.degenerate
    selected = report.selected()
    assert "V1" in selected
    assert "severity" not in selected
    by_name = {e["name"]: e for e in report.entries}
    assert len(by_name["V1"]["rf_scores"]) == 4
    assert by_name["V1"]["rf_score_mean"] > by_name["V3"]["rf_score_mean"]


def test_consensus_deterministic(rng):
    ds = _screening_dataset(rng)
    kw = dict(folds=3, seed=2, rf_params={"n_trees": 12},
              gb_params={"n_rounds": 8})
    assert (consensus_select(ds, "severity", **kw).to_json()
            == consensus_select(ds, "severity", **kw).to_json())


def test_consensus_rejects_rare_class(rng):
    n = 60
    y = np.zeros(n, dtype=np.int32)
    y[0] = 1  # a single row of the second class cannot stratify
    codes = np.column_stack([rng.integers(0, 3, size=n), y])
    ds = make_dataset(codes, [3, 2], target="V2", names=["V1", "V2"])
    with pytest.raises(DataError, match="use fewer folds"):
        consensus_select(ds, "V2", folds=2, seed=0,
                         rf_params={"n_trees": 2}, gb_params={"n_rounds": 2})


def test_consensus_argument_validation(rng):
    ds = _screening_dataset(rng, n=60)
    with pytest.raises(DataError):
        consensus_select(ds, "severity", folds=1)
    with pytest.raises(DataError):
        consensus_select(ds, "severity", rule="loudest")
    with pytest.raises(DataError):
        consensus_select(ds, "nope")


def test_consensus_degenerate_single_class_target(rng):
    n = 80
    codes = np.column_stack([rng.integers(0, 3, size=n),
                             np.zeros(n, dtype=np.int32)])
    ds = make_dataset(codes, [3, 2], target="V2", names=["V1", "V2"])
    report = consensus_select(ds, "V2", folds=2, seed=0,
                              rf_params={"n_trees": 2},
                              gb_params={"n_rounds": 2})
    assert report.degenerate

"""Planted-cluster generator and the adjusted Rand index."""

import numpy as np
import pytest

from pattica.errors import DataError
from pattica.synth import PlantedSpec, adjusted_rand_index, generate


def test_ari_identical_is_one():
    a = np.array([0, 1, 2, 0, 1, 2])
    assert adjusted_rand_index(a, a) == 1.0


def test_ari_relabel_invariant(rng):
    a = rng.integers(0, 4, size=200)
    perm = rng.permutation(4)
    assert adjusted_rand_index(a, perm[a]) == 1.0


def test_ari_symmetric(rng):
    a = rng.integers(0, 3, size=100)
    b = rng.integers(0, 4, size=100)
    assert adjusted_rand_index(a, b) == adjusted_rand_index(b, a)


# hand case over all 15 pairs: sum_ij C(nij,2)=2, sum_a=6, sum_b=3,
# expected=6*3/15=1.2, max=4.5 -> ARI = (2-1.2)/(4.5-1.2) = 8/33
def test_ari_hand_case():
    a = np.array([0, 0, 0, 1, 1, 1])
    b = np.array([0, 0, 1, 1, 2, 2])
    assert abs(adjusted_rand_index(a, b) - 8 / 33) < 1e-15


def test_ari_single_cluster_degenerate():
    a = np.zeros(5, dtype=int)
    assert adjusted_rand_index(a, a) == 1.0


def test_ari_length_mismatch():
    with pytest.raises(DataError):
        adjusted_rand_index(np.zeros(3, dtype=int), np.zeros(4, dtype=int))


def test_generator_deterministic():
    spec = PlantedSpec(n=300, Q=5, n_categories=4, K_true=3, delta=0.5, seed=7)
    a, b = generate(spec), generate(spec)
    assert np.array_equal(a.dataset.codes, b.dataset.codes)
    assert np.array_equal(a.true_labels, b.true_labels)


def test_generator_shape_and_labels():
    spec = PlantedSpec(n=200, Q=6, n_categories=5, K_true=4, delta=0.6, seed=1)
    out = generate(spec)
    assert out.dataset.codes.shape == (200, 6)
    assert out.true_labels.shape == (200,)
    assert out.true_labels.min() >= 0 and out.true_labels.max() < 4
    assert out.dataset.schema.target is None


def test_delta_one_constant_within_cluster():
    spec = PlantedSpec(n=400, Q=4, n_categories=5, K_true=4, delta=1.0, seed=3)
    out = generate(spec)
    for k in range(4):
        rows = out.dataset.codes[out.true_labels == k]
        assert (rows == rows[0]).all()


def test_delta_one_infeasible_with_few_categories():
    with pytest.raises(DataError):
        generate(PlantedSpec(n=50, Q=3, n_categories=3, K_true=4, delta=1.0, seed=0))


def test_delta_zero_uniform():
    spec = PlantedSpec(n=6000, Q=3, n_categories=4, K_true=3, delta=0.0, seed=5)
    out = generate(spec)
    for j in range(3):
        shares = np.bincount(out.dataset.codes[:, j], minlength=4) / 6000
        assert np.all(np.abs(shares - 0.25) < 0.03)


# mixture modal share = delta + (1-delta)/C = 0.6 + 0.4/5 = 0.68
def test_modal_share_matches_mixture_formula():
    spec = PlantedSpec(n=2000, Q=8, n_categories=5, K_true=4, delta=0.6, seed=11)
    out = generate(spec)
    shares = []
    for k in range(4):
        rows = out.dataset.codes[out.true_labels == k]
        for j in range(8):
            counts = np.bincount(rows[:, j], minlength=5)
            shares.append(counts.max() / rows.shape[0])
    assert abs(np.mean(shares) - 0.68) < 0.05
    assert np.all(np.abs(np.array(shares) - 0.68) < 0.1)


def test_severity_link_distribution():
    link = {0: (0.9, 0.05, 0.05), 1: (0.05, 0.9, 0.05)}
    spec = PlantedSpec(n=4000, Q=3, n_categories=4, K_true=2, delta=0.5,
                       severity_link=link, seed=13)
    out = generate(spec)
    ds = out.dataset
    assert ds.schema.target == "severity"
    y = ds.target_codes
    classes = ds.schema.variable("severity").categories
    assert classes == ("KA", "BC", "O")
    for k, dist in link.items():
        rows = y[out.true_labels == k]
        emp = np.bincount(rows, minlength=3) / rows.size
        assert np.all(np.abs(emp - np.array(dist)) < 0.04)


def test_severity_link_validation():
    with pytest.raises(DataError):
        PlantedSpec(n=10, Q=2, n_categories=3, K_true=2, delta=0.5,
                    severity_link={0: (0.5, 0.5, 0.0)}, seed=0)
    with pytest.raises(DataError):
        PlantedSpec(n=10, Q=2, n_categories=3, K_true=2, delta=0.5,
                    severity_link={0: (2.0, -1.0, 0.0), 1: (0.4, 0.3, 0.3)}, seed=0)


def test_spec_validation():
    with pytest.raises(DataError):
        PlantedSpec(n=0, Q=2, n_categories=3, K_true=2, delta=0.5, seed=0)
    with pytest.raises(DataError):
        PlantedSpec(n=10, Q=2, n_categories=3, K_true=2, delta=1.5, seed=0)
    with pytest.raises(DataError):
        PlantedSpec(n=10, Q=2, n_categories=1, K_true=2, delta=0.5, seed=0)


def test_skewed_priors_respected():
    spec = PlantedSpec(n=5000, Q=3, n_categories=4, K_true=4, delta=0.5,
                       priors=(0.38, 0.217, 0.202, 0.201), seed=17)
    out = generate(spec)
    emp = np.bincount(out.true_labels, minlength=4) / 5000
    assert np.all(np.abs(emp - np.array(spec.priors)) < 0.03)


def test_recovery_improves_with_separation():
    """Median recovery over seeds is non-decreasing in the separation knob."""
    from pattica.cca import cluster_ca
    from pattica.dataset import indicator

    medians = []
    for delta in (0.2, 0.4, 0.6, 0.8):
        scores = []
        for seed in range(5):
            out = generate(PlantedSpec(n=800, Q=6, n_categories=4, K_true=3,
                                       delta=delta, seed=seed))
            Z = indicator(out.dataset)
            sol = cluster_ca(Z, 3, restarts=8, seed=seed)
            scores.append(adjusted_rand_index(sol.assign, out.true_labels))
        medians.append(float(np.median(scores)))
    assert all(b >= a - 1e-12 for a, b in zip(medians, medians[1:])), medians

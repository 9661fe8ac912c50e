"""Planted-cluster data generator and partition-agreement scoring.

Recovery tests need categorical data whose true grouping is known. Each
cluster draws every variable from a mixture of a uniform distribution and
a point mass on a cluster-specific modal category, so the expected modal
share is available in closed form: delta + (1 - delta) / n_categories.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import comb

import numpy as np

from .dataset import CategoricalDataset, Schema, Variable
from .errors import DataError
from .seeding import substream


@dataclass(frozen=True)
class PlantedSpec:
    n: int
    Q: int
    n_categories: int | tuple[int, ...] = 5
    K_true: int = 4
    delta: float = 0.6
    priors: tuple[float, ...] | None = None
    severity_link: dict[int, tuple[float, ...]] | None = None
    severity_classes: tuple[str, ...] = ("KA", "BC", "O")
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.Q < 1 or self.K_true < 1:
            raise DataError("n, Q and K_true must all be positive")
        if not 0.0 <= self.delta <= 1.0:
            raise DataError(f"separation delta must lie in [0, 1], got {self.delta}")
        cats = self.category_counts
        if any(c < 2 for c in cats):
            raise DataError("every variable needs at least 2 categories")
        if self.priors is not None:
            if len(self.priors) != self.K_true:
                raise DataError("priors length must equal K_true")
            if any(p < 0 for p in self.priors) or abs(sum(self.priors) - 1.0) > 1e-9:
                raise DataError("priors must be nonnegative and sum to 1")
        if self.severity_link is not None:
            for k, dist in self.severity_link.items():
                if not 0 <= k < self.K_true:
                    raise DataError(f"severity_link cluster {k} out of range")
                if len(dist) != len(self.severity_classes):
                    raise DataError("severity_link distributions must cover every class")
                if any(p < 0 for p in dist) or abs(sum(dist) - 1.0) > 1e-9:
                    raise DataError("severity_link rows must be distributions")
            if set(self.severity_link) != set(range(self.K_true)):
                raise DataError("severity_link must map every cluster")

    @property
    def category_counts(self) -> tuple[int, ...]:
        if isinstance(self.n_categories, int):
            return (self.n_categories,) * self.Q
        if len(self.n_categories) != self.Q:
            raise DataError("per-variable category counts must have length Q")
        return tuple(self.n_categories)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "Q": self.Q,
                "n_categories": list(self.category_counts),
                "K_true": self.K_true,
                "delta": self.delta,
                "priors": list(self.priors) if self.priors else None,
                "severity_link": {str(k): list(v) for k, v in self.severity_link.items()}
                if self.severity_link
                else None,
                "severity_classes": list(self.severity_classes),
                "seed": self.seed,
            },
            indent=2,
        )


@dataclass(frozen=True)
class PlantedDataset:
    dataset: CategoricalDataset
    true_labels: np.ndarray  # (n,) int32 in [0, K_true)
    spec: PlantedSpec


def generate(spec: PlantedSpec) -> PlantedDataset:
    """Draw a dataset with K_true planted clusters.

    Per cluster and variable the category distribution is
    (1 - delta) * uniform + delta * point-mass on a modal category chosen
    by a per-variable permutation, so modal categories are disjoint across
    clusters whenever a variable has at least K_true categories. At
    delta=1 that is required and enforced.
    """
    cats = spec.category_counts
    if spec.delta == 1.0 and any(c < spec.K_true for c in cats):
        raise DataError(
            "delta=1 requires every variable to have at least K_true categories, "
            "otherwise clusters cannot take disjoint modal categories"
        )
    rng = substream(spec.seed, "synth")

    modal = np.zeros((spec.K_true, spec.Q), dtype=np.int32)
    for v in range(spec.Q):
        perm = rng.permutation(cats[v])
        modal[:, v] = perm[np.arange(spec.K_true) % cats[v]]

    priors = np.full(spec.K_true, 1.0 / spec.K_true) if spec.priors is None else np.asarray(spec.priors)
    labels = rng.choice(spec.K_true, size=spec.n, p=priors).astype(np.int32)

    codes = np.zeros((spec.n, spec.Q), dtype=np.int32)
    for v in range(spec.Q):
        take_modal = rng.random(spec.n) < spec.delta
        uniform = rng.integers(0, cats[v], spec.n).astype(np.int32)
        codes[:, v] = np.where(take_modal, modal[labels, v], uniform)

    variables = [
        Variable(name=f"V{v + 1}", categories=tuple(f"c{c + 1}" for c in range(cats[v])))
        for v in range(spec.Q)
    ]
    target = None
    if spec.severity_link is not None:
        table = np.array([spec.severity_link[k] for k in range(spec.K_true)])
        u = rng.random(spec.n)
        cdf = np.cumsum(table, axis=1)
        severity = (u[:, None] > cdf[labels]).sum(axis=1).astype(np.int32)
        severity = np.minimum(severity, len(spec.severity_classes) - 1)
        codes = np.column_stack([codes, severity])
        variables.append(Variable(name="severity", categories=spec.severity_classes))
        target = "severity"

    schema = Schema(variables=tuple(variables), target=target)
    return PlantedDataset(
        dataset=CategoricalDataset(schema=schema, codes=codes),
        true_labels=labels,
        spec=spec,
    )


def adjusted_rand_index(a: np.ndarray, b: np.ndarray) -> float:
    """Chance-corrected partition agreement from exact pair counts."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise DataError(f"label vectors differ in length: {a.shape[0]} vs {b.shape[0]}")
    n = a.shape[0]
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    sum_ij = sum(comb(int(x), 2) for x in table.ravel())
    sum_a = sum(comb(int(x), 2) for x in table.sum(axis=1))
    sum_b = sum(comb(int(x), 2) for x in table.sum(axis=0))
    pairs = comb(n, 2)
    expected = sum_a * sum_b
    max_index = pairs * (sum_a + sum_b)
    # ARI = (sum_ij - E) / (max - E) with E = sum_a*sum_b/pairs, kept integral
    numer = sum_ij * pairs - expected
    denom = max_index - 2 * expected
    if denom == 0:
        # both partitions are trivial in the same way
        return 1.0
    return 2.0 * numer / denom

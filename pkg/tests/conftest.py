"""Shared fixtures plus the acceptance-criteria summary printer."""

from __future__ import annotations

import numpy as np
import pytest

from pattica.dataset import CategoricalDataset, Schema, Variable

_criteria: list[tuple[int, bool, str]] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    _criteria.append((number, passed, detail))


def pytest_terminal_summary(terminalreporter) -> None:
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_criteria):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status} - {detail}")


def make_dataset(codes: np.ndarray, n_categories, target: str | None = None,
                 names=None) -> CategoricalDataset:
    """Categorical dataset from a code matrix; categories named c1..cm."""
    codes = np.asarray(codes, dtype=np.int32)
    q = codes.shape[1]
    if isinstance(n_categories, int):
        n_categories = [n_categories] * q
    if names is None:
        names = [f"V{j + 1}" for j in range(q)]
    variables = tuple(
        Variable(names[j], tuple(f"c{i + 1}" for i in range(n_categories[j])))
        for j in range(q)
    )
    return CategoricalDataset(Schema(variables, target=target), codes)


@pytest.fixture
def rng():
    return np.random.default_rng(20240819)

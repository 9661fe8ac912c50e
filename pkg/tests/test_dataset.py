"""CSV ingestion, the skew filter, indicator coding, and contingency counts."""

import numpy as np
import pytest

from conftest import make_dataset
from pattica.dataset import (
    CategoricalDataset,
    Schema,
    Variable,
    contingency,
    indicator,
    load_csv,
    skew_filter,
    write_csv,
)
from pattica.errors import DataError


def _write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_small_corpus_dimensions(tmp_path):
    p = _write(tmp_path, "Weather,Light\nClear,Day\nRain,Dark\nClear,Dark\n")
    ds = load_csv(p)
    assert ds.n == 3
    assert len(ds.schema.variables) == 2
    Z = indicator(ds)
    assert Z.J == 4


def test_load_infer_first_appearance(tmp_path):
    p = _write(tmp_path, "color,size\nred,small\nblue,large\nred,large\n")
    ds = load_csv(p)
    assert ds.schema.names == ["color", "size"]
    assert ds.schema.variable("color").categories == ("red", "blue")
    assert ds.schema.variable("size").categories == ("small", "large")
    assert ds.codes.tolist() == [[0, 0], [1, 1], [0, 1]]


def test_round_trip(tmp_path, rng):
    ds = make_dataset(rng.integers(0, 4, size=(50, 3)), 4, target="V3")
    path = tmp_path / "out.csv"
    write_csv(ds, path)

    # declared mode restores the exact codes
    exact = load_csv(path, schema_mode="declared", schema=ds.schema, target="V3")
    assert exact.schema.names == ds.schema.names
    assert np.array_equal(exact.codes, ds.codes)
    assert exact.schema.target == "V3"

    # infer mode restores the same values (codes may renumber)
    back = load_csv(path, target="V3")
    for name in ds.schema.names:
        j = ds.schema.index_of(name)
        orig = [ds.schema.variable(name).categories[c] for c in ds.codes[:, j]]
        got = [back.schema.variable(name).categories[c] for c in back.codes[:, j]]
        assert got == orig


def test_declared_mode_fixes_order(tmp_path):
    p = _write(tmp_path, "color\nred\nblue\n")
    schema = Schema((Variable("color", ("blue", "red", "green")),))
    ds = load_csv(p, schema_mode="declared", schema=schema)
    assert ds.codes[:, 0].tolist() == [1, 0]


def test_declared_mode_unknown_value_names_location(tmp_path):
    p = _write(tmp_path, "color\nred\npuce\n")
    schema = Schema((Variable("color", ("red", "blue")),))
    with pytest.raises(DataError, match=r"row 3.*color"):
        load_csv(p, schema_mode="declared", schema=schema)


def test_ragged_row_rejected(tmp_path):
    p = _write(tmp_path, "a,b\n1,2\n3\n")
    with pytest.raises(DataError, match="row 3"):
        load_csv(p)


def test_blank_cell_rejected(tmp_path):
    p = _write(tmp_path, "a,b\n1,\n")
    with pytest.raises(DataError, match="blank"):
        load_csv(p)


def test_empty_and_missing_files(tmp_path):
    with pytest.raises(DataError):
        load_csv(tmp_path / "absent.csv")
    p = _write(tmp_path, "")
    with pytest.raises(DataError, match="empty"):
        load_csv(p)
    p2 = _write(tmp_path, "a,b\n", name="headeronly.csv")
    with pytest.raises(DataError, match="no data rows"):
        load_csv(p2)


# constructs shares of exactly 0.86 / 0.85 / 0.84 over 100 rows
def test_skew_filter_boundary():
    codes = np.zeros((100, 3), dtype=np.int32)
    codes[86:, 0] = 1
    codes[85:, 1] = 1
    codes[84:, 2] = 1
    ds = make_dataset(codes, 2, names=["p86", "p85", "p84"])
    kept, report = skew_filter(ds, 0.85)
    assert kept.schema.names == ["p85", "p84"]
    by_name = {e["variable"]: e for e in report.entries}
    assert not by_name["p86"]["kept"] and by_name["p86"]["modal_share"] == 0.86
    assert by_name["p85"]["kept"] and by_name["p85"]["modal_share"] == 0.85
    assert by_name["p84"]["kept"]


def test_skew_filter_never_drops_target():
    codes = np.zeros((100, 2), dtype=np.int32)
    codes[99:, 0] = 1  # 0.99 modal share
    codes[:50, 1] = 1
    ds = make_dataset(codes, 2, target="V1")
    kept, report = skew_filter(ds, 0.85)
    assert "V1" in kept.schema.names
    assert kept.schema.target == "V1"


def test_skew_filter_threshold_bounds():
    ds = make_dataset(np.zeros((10, 1), dtype=np.int32), 2)
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(DataError):
            skew_filter(ds, bad)


def test_indicator_block_structure(rng):
    ds = make_dataset(rng.integers(0, 3, size=(40, 4)), 3, target="V4")
    Z = indicator(ds, active_vars=("V1", "V2", "V3"))
    assert Z.q == 3 and Z.J == 9
    assert Z.var_names == ("V1", "V2", "V3")
    # exactly one 1 per block per row
    for (lo, hi) in Z.blocks:
        assert np.array_equal(Z.Z[:, lo:hi].sum(axis=1), np.ones(40, dtype=np.uint8))
    assert Z.Z.sum() == 40 * 3
    labels = Z.column_labels()
    assert labels[0] == "V1=c1" and len(labels) == 9


def test_indicator_exact_single_variable():
    ds = make_dataset(np.array([[0], [2], [1]], dtype=np.int32), 3)
    Z = indicator(ds)
    assert np.array_equal(
        Z.Z, np.array([[1, 0, 0], [0, 0, 1], [0, 1, 0]], dtype=Z.Z.dtype)
    )


def test_indicator_exact_two_variables():
    codes = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int32)
    Z = indicator(make_dataset(codes, 2))
    want = np.array(
        [[1, 0, 1, 0], [1, 0, 0, 1], [0, 1, 1, 0], [0, 1, 0, 1]], dtype=Z.Z.dtype
    )
    assert np.array_equal(Z.Z, want)
    assert np.all(Z.Z.sum(axis=1) == 2)


def test_indicator_defaults_to_all_variables(rng):
    ds = make_dataset(rng.integers(0, 2, size=(10, 3)), 2, target="V2")
    assert indicator(ds).var_names == ("V1", "V2", "V3")
    assert indicator(ds, active_vars=("V3", "V1")).var_names == ("V1", "V3")


def test_indicator_unknown_variable(rng):
    ds = make_dataset(rng.integers(0, 2, size=(10, 2)), 2)
    with pytest.raises(DataError):
        indicator(ds, active_vars=("V1", "nope"))


def test_contingency_counts(rng):
    ds = make_dataset(rng.integers(0, 3, size=(60, 3)), 3)
    Z = indicator(ds)
    assign = rng.integers(0, 4, size=60).astype(np.int32)
    F = contingency(Z, assign, 4)
    assert F.F.shape == (4, 9)
    assert F.F.sum() == 60 * 3
    for k in range(4):
        assert np.array_equal(F.F[k], Z.Z[assign == k].sum(axis=0))


def test_contingency_single_cluster_is_column_sums(rng):
    ds = make_dataset(rng.integers(0, 3, size=(25, 4)), 3)
    Z = indicator(ds)
    F = contingency(Z, np.zeros(25, dtype=np.int32), 1)
    assert np.array_equal(F.F[0], Z.Z.sum(axis=0))
    assert F.grand_total == 25 * 4


def test_contingency_rejects_bad_labels(rng):
    ds = make_dataset(rng.integers(0, 2, size=(10, 2)), 2)
    Z = indicator(ds)
    with pytest.raises(DataError):
        contingency(Z, np.full(10, 5, dtype=np.int32), 4)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpbag.dataset import (NEGATIVE, POSITIVE, ColumnKind, DatasetError, SplitSpec, bootstrap,
                           canonicalize_labels, class_partition, load_csv, save_csv,
                           stratified_split, summarize)

from conftest import make_dataset


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# ---------------------------------------------------------------- load_csv

def test_ionosphere_counts(ionosphere):
    s = summarize(ionosphere)
    assert (s.total, s.minority_count) == (351, 126)
    # the shipped copy lacks the constant second attribute of the 34
    assert s.feature_count == 33


def test_yeast_me3_counts(yeast):
    assert yeast.positive_count == 163
    # shipped source has 1484 rows; the published table lists 1482
    assert yeast.total == 1484


def test_vowel0_summary(vowel0):
    s = summarize(vowel0)
    assert (s.total, s.minority_count) == (988, 90)
    assert round(s.minority_fraction, 3) == 0.091
    assert s.imbalance_ratio == pytest.approx(898 / 90)
    assert vowel0.column_kinds[:3] == (ColumnKind.INTEGER,) * 3
    assert vowel0.column_kinds[3] is ColumnKind.REAL


def test_header_only_file_has_no_data_rows(tmp_path):
    with pytest.raises(DatasetError, match="no data rows"):
        load_csv(write(tmp_path, "a,b,class\n"), "class")


def test_empty_file(tmp_path):
    with pytest.raises(DatasetError, match="no data rows"):
        load_csv(write(tmp_path, ""), "class")


def test_missing_file(tmp_path):
    with pytest.raises(DatasetError, match="nope.csv"):
        load_csv(tmp_path / "nope.csv")


def test_unparseable_cell_reports_row_and_column(tmp_path):
    p = write(tmp_path, "a,b,class\n1,2,x\n3,oops,y\n")
    with pytest.raises(DatasetError, match=r"row 3, column 'b'"):
        load_csv(p, "class", "x")


def test_missing_label_column(tmp_path):
    with pytest.raises(DatasetError, match="label column"):
        load_csv(write(tmp_path, "a,b\n1,2\n3,4\n"), "class")


def test_single_label_rejected(tmp_path):
    with pytest.raises(DatasetError, match="fewer than two distinct labels"):
        load_csv(write(tmp_path, "a,class\n1,x\n2,x\n"), "class", "x")


def test_label_by_index_and_order(tmp_path):
    p = write(tmp_path, "class,a,b\nneg,1,2.5\npos,3,4\nneg,5,6\n")
    d = load_csv(p, 0, "pos")
    assert d.labels.tolist() == [NEGATIVE, POSITIVE, NEGATIVE]
    assert d.features.tolist() == [[1, 2.5], [3, 4], [5, 6]]
    assert d.column_kinds == (ColumnKind.INTEGER, ColumnKind.REAL)
    assert d.feature_names == ("a", "b")


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(1)
    d = make_dataset(rng.normal(size=(20, 3)), rng.integers(0, 2, 20))
    p = tmp_path / "rt.csv"
    save_csv(d, p, "class", "pos", "neg")
    back = load_csv(p, "class", "pos")
    assert np.array_equal(back.features, d.features)
    assert np.array_equal(back.labels, d.labels)


# ---------------------------------------------------------------- summarize

def test_summarize_balanced_and_direct():
    assert summarize(make_dataset(np.arange(20), [1] * 10 + [0] * 10)).imbalance_ratio == 1.0
    assert summarize(make_dataset(np.arange(15), [1] * 3 + [0] * 12)).imbalance_ratio == 4.0


def test_summarize_without_minority():
    with pytest.raises(DatasetError, match="no minority class"):
        summarize(make_dataset(np.arange(4), [0, 0, 0, 0]))


@given(st.lists(st.integers(0, 1), min_size=2, max_size=60).filter(lambda y: 1 in y))
def test_summary_matches_naive_scan(labels):
    d = make_dataset(np.arange(len(labels)), labels)
    s = summarize(d)
    naive = sum(1 for v in labels if v == 1)
    assert s.minority_count == naive
    assert s.minority_fraction == naive / len(labels)


def test_canonicalize_swaps_majority_positive():
    d = canonicalize_labels(make_dataset(np.arange(5), [1, 1, 1, 0, 0]))
    assert d.labels.tolist() == [0, 0, 0, 1, 1]


# ---------------------------------------------------------------- splitting

def test_yeast_half_split_positive_count(yeast):
    train, test = stratified_split(yeast, SplitSpec(0.5, True, 7))
    assert train.positive_count in (81, 82)
    assert train.total + test.total == yeast.total


def test_fraction_one_is_identity(yeast):
    train, test = stratified_split(yeast, SplitSpec(1.0, True, 0))
    assert train is yeast and test.total == 0


def test_toy_split_always_six_positives():
    d = make_dataset(np.arange(100), [1] * 20 + [0] * 80)
    for seed in range(25):
        train, _ = stratified_split(d, SplitSpec(0.3, True, seed))
        assert train.positive_count == 6
        assert train.negative_count == 24


def test_split_that_starves_a_class():
    d = make_dataset(np.arange(10), [1] + [0] * 9)
    with pytest.raises(DatasetError, match="without training rows"):
        stratified_split(d, SplitSpec(0.2, True, 0))


def test_split_fraction_bounds():
    with pytest.raises(ValueError):
        SplitSpec(0.0)
    with pytest.raises(ValueError):
        SplitSpec(1.5)


@settings(max_examples=60, deadline=None)
@given(P=st.integers(1, 40), N=st.integers(1, 80), f=st.floats(0.05, 0.95), seed=st.integers(0, 2**32))
def test_split_is_a_partition_with_bounded_counts(P, N, f, seed):
    ids = np.arange(P + N, dtype=np.float64)
    d = make_dataset(ids, [1] * P + [0] * N)
    n_pos = min(math.floor(f * P + 0.5), P)
    n_neg = min(max(math.floor(f * (P + N) + 0.5) - n_pos, 0), N)
    if n_pos == 0 or n_neg == 0:
        with pytest.raises(DatasetError):
            stratified_split(d, SplitSpec(f, True, seed))
        return
    train, test = stratified_split(d, SplitSpec(f, True, seed))
    rows = np.concatenate([train.features[:, 0], test.features[:, 0]])
    assert sorted(rows.tolist()) == ids.tolist()
    assert abs(train.positive_count - f * P) <= 1
    assert abs(train.negative_count - f * N) <= 1
    again = stratified_split(d, SplitSpec(f, True, seed))
    assert np.array_equal(again[0].features, train.features)


# ---------------------------------------------------------------- partition

def test_class_partition():
    d = make_dataset(np.arange(4), [1, 0, 1, 0])
    pos, neg = class_partition(d)
    assert pos.features[:, 0].tolist() == [0, 2]
    assert neg.features[:, 0].tolist() == [1, 3]


def test_ionosphere_partition(ionosphere):
    pos, neg = class_partition(ionosphere)
    assert (pos.total, neg.total) == (126, 225)


def test_partition_needs_two_classes():
    with pytest.raises(DatasetError):
        class_partition(make_dataset(np.arange(3), [1, 1, 1]))


# ---------------------------------------------------------------- bootstrap

def test_bootstrap_point_mass():
    d = make_dataset(np.arange(3), [1, 0, 0])
    out = bootstrap(d, 5, [1, 0, 0], seed=3)
    assert out.features[:, 0].tolist() == [0] * 5


def test_bootstrap_uniform_frequency():
    d = make_dataset(np.arange(2), [1, 0])
    out = bootstrap(d, 10000, seed=11)
    hits = int(np.sum(out.features[:, 0] == 0))
    assert abs(hits - 5000) <= 3 * math.sqrt(10000 * 0.25)


def test_bootstrap_weighted_frequency():
    d = make_dataset(np.arange(2), [1, 0])
    n = 20000
    hits = int(np.sum(bootstrap(d, n, [3, 1], seed=5).features[:, 0] == 0))
    assert abs(hits - 0.75 * n) <= 3 * math.sqrt(n * 0.75 * 0.25)


def test_bootstrap_all_zero_weights():
    d = make_dataset(np.arange(2), [1, 0])
    with pytest.raises(DatasetError, match="zero"):
        bootstrap(d, 3, [0, 0])


def test_bootstrap_deterministic():
    d = make_dataset(np.arange(30), [1] * 5 + [0] * 25)
    a = bootstrap(d, 50, np.arange(30.0), seed=9)
    b = bootstrap(d, 50, np.arange(30.0), seed=9)
    assert np.array_equal(a.features, b.features)


@given(st.integers(2, 20), st.integers(0, 19), st.integers(0, 1000))
def test_bootstrap_point_mass_any_row(size, row, seed):
    row = row % size
    w = np.zeros(size)
    w[row] = 2.5
    d = make_dataset(np.arange(size), [1] + [0] * (size - 1))
    assert set(bootstrap(d, 30, w, seed).features[:, 0].tolist()) == {row}

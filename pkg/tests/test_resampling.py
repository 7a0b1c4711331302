import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpbag.dataset import NEGATIVE, POSITIVE, ColumnKind, DatasetError, class_partition
from gpbag.resampling import (Oversampler, ResamplingPlan, Undersampler, balance, ncl_clean,
                              nearest_neighbors, random_oversample, random_undersample, smote,
                              smote_samples)

from conftest import make_dataset


def rows(d):
    return {tuple(r) for r in d.features.tolist()}


# ------------------------------------------------------------- neighbours

def test_neighbour_ties_go_to_lower_index():
    X = np.array([[0.0], [1.0], [-1.0], [2.0]])
    nn = nearest_neighbors(X, 2)
    # row 0 is equidistant from rows 1 and 2
    assert nn[0].tolist() == [1, 2]


def test_neighbour_k_bounds():
    with pytest.raises(ValueError):
        nearest_neighbors(np.zeros((3, 1)), 3)


# ------------------------------------------------------------- oversampling

def test_random_oversample_identity():
    d = make_dataset(np.arange(4), [1] * 4)
    assert random_oversample(d, 0, seed=1) is d


def test_random_oversample_single_row():
    d = make_dataset([[2.0, 3.0]], [1])
    out = random_oversample(d, 4, seed=1)
    assert out.total == 5
    assert rows(out) == {(2.0, 3.0)}
    assert out.synthetic_mask.tolist() == [False] + [True] * 4


def test_random_oversample_membership():
    rng = np.random.default_rng(0)
    d = make_dataset(rng.normal(size=(10, 3)), [1] * 10)
    out = random_oversample(d, 10, seed=2)
    assert out.total == 20
    assert rows(out) <= rows(d)


def test_smote_two_points_is_on_the_diagonal():
    d = make_dataset([[0.0, 0.0], [1.0, 1.0]], [1, 1])
    out = smote(d, 1, k=5, seed=4)
    g = out.features[2]
    assert g[0] == g[1] and 0.0 <= g[0] <= 1.0
    assert out.labels.tolist() == [POSITIVE] * 3


def test_smote_identity_and_minimum():
    d = make_dataset([[0.0], [1.0]], [1, 1])
    assert smote(d, 0) is d
    with pytest.raises(DatasetError, match="SMOTE requires >= 2"):
        smote(make_dataset([[0.0]], [1]), 3)


def test_smote_within_parent_box_on_yeast_bag(yeast):
    pos, _ = class_partition(yeast)
    X = pos.features[:80]
    s, base, nb, gap = smote_samples(X, 80, 5, np.random.default_rng(3))
    lo = np.minimum(X[base], X[nb])
    hi = np.maximum(X[base], X[nb])
    assert np.all(s >= lo) and np.all(s <= hi)
    assert np.all((gap >= 0) & (gap <= 1))


def test_smote_parents_are_among_k_nearest():
    rng = np.random.default_rng(8)
    X = rng.random((30, 2))
    _, base, nb, _ = smote_samples(X, 200, 3, np.random.default_rng(1), normalize=False)
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    for b, n in zip(base, nb):
        # brute-force rank of the chosen neighbour
        assert (d2[b] < d2[b, n]).sum() < 3


def test_smote_rounds_integer_columns():
    X = np.array([[0, 0.0], [3, 1.0], [10, 2.0]])
    d = make_dataset(X, [1, 1, 1], kinds=(ColumnKind.INTEGER, ColumnKind.REAL))
    out = smote(d, 50, k=2, seed=0)
    ints = out.features[:, 0]
    assert np.array_equal(ints, np.rint(ints))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 25), extra=st.integers(1, 40), k=st.integers(1, 6),
       seed=st.integers(0, 10**6), int_col=st.booleans())
def test_smote_convexity(n, extra, k, seed, int_col):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3)) * 10
    if int_col:
        X[:, 0] = np.rint(X[:, 0])
    mask = np.array([int_col, False, False])
    s, base, nb, _ = smote_samples(X, extra, k, np.random.default_rng(seed + 1), mask)
    lo = np.minimum(X[base], X[nb])
    hi = np.maximum(X[base], X[nb])
    slack = np.where(mask, 0.5, 1e-9)
    assert np.all(s >= lo - slack) and np.all(s <= hi + slack)


# ------------------------------------------------------------- undersampling

def test_random_undersample_full_keep_is_identity_up_to_order():
    d = make_dataset(np.arange(6), [0] * 6)
    assert sorted(random_undersample(d, 6, 3).features[:, 0]) == list(range(6))


def test_random_undersample_uniform():
    d = make_dataset(np.arange(3), [0] * 3)
    trials = 3000
    counts = np.zeros(3)
    for s in range(trials):
        counts[int(random_undersample(d, 1, s).features[0, 0])] += 1
    sigma = math.sqrt(trials * (1 / 3) * (2 / 3))
    assert np.all(np.abs(counts - trials / 3) <= 3 * sigma)


@pytest.mark.parametrize("keep", [0, 4])
def test_random_undersample_bounds(keep):
    with pytest.raises(DatasetError):
        random_undersample(make_dataset(np.arange(3), [0] * 3), keep)


# ------------------------------------------------------------- NCL

def test_ncl_clean_neighbourhoods_are_identity():
    X = np.array([[0.0], [0.1], [0.2], [0.3], [10.0], [10.1], [10.2], [10.3]])
    d = make_dataset(X, [0, 0, 0, 0, 1, 1, 1, 1])
    out = ncl_clean(d, 3)
    assert out.total == d.total


def test_ncl_removes_embedded_negative():
    # five positives around the origin with one negative in the middle
    X = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.1, 0.1]])
    y = [1, 1, 1, 1, 1, 0]
    # plus far-away negatives so the set is imbalanced the usual way
    X = np.vstack([X, [[20.0, 20.0], [20.5, 20.0], [20.0, 20.5], [21.0, 21.0]]])
    y = y + [0, 0, 0, 0]
    out = ncl_clean(make_dataset(X, y), 3, normalize=False)
    assert (0.1, 0.1) not in rows(out)
    assert out.positive_count == 5
    assert out.total == 9


def test_ncl_removes_negative_neighbours_of_misclassified_positive():
    X = np.array([[0.0], [1.0], [1.1], [1.2], [5.0], [6.0]])
    y = [1, 0, 0, 0, 1, 1]
    # the first positive's 3 neighbours are all negative; they vote it wrong
    out = ncl_clean(make_dataset(X, y), 3, normalize=False)
    assert out.negative_count < 3
    assert out.positive_count == 3


def test_ncl_k_too_large():
    with pytest.raises(DatasetError, match="smaller than the row count"):
        ncl_clean(make_dataset(np.arange(3), [1, 0, 0]), 3)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), P=st.integers(1, 15), N=st.integers(3, 40))
def test_ncl_is_a_subset_and_keeps_positives(seed, P, N):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(P + N, 2))
    d = make_dataset(X, [1] * P + [0] * N)
    out = ncl_clean(d, 3)
    assert rows(out) <= rows(d)
    assert out.positive_count == P


# ------------------------------------------------------------- balance

def nine_to_one(seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(100, 3))
    return make_dataset(X, [1] * 10 + [0] * 90)


def test_balance_none_none_identity():
    d = nine_to_one()
    plan = ResamplingPlan(Oversampler.NONE, Undersampler.NONE)
    assert balance(d, plan) is d


def test_balance_smote_random_reaches_one_to_one():
    out = balance(nine_to_one(), ResamplingPlan(seed=3))
    assert abs(out.negative_count - out.positive_count) <= 1


def test_balanced_bag_unchanged():
    d = make_dataset(np.arange(20), [1] * 10 + [0] * 10)
    out = balance(d, ResamplingPlan(seed=1))
    assert out.total == 20 and not out.synthetic_mask.any()


def test_balance_majority_keep_out_of_range():
    with pytest.raises(DatasetError, match="majority_keep"):
        balance(nine_to_one(), ResamplingPlan(majority_keep=91))


def test_plan_validation():
    with pytest.raises(ValueError):
        ResamplingPlan(target_ratio=0.5)
    with pytest.raises(ValueError):
        ResamplingPlan(smote_k=0)


PLANS = [(o, u) for o in Oversampler for u in (Undersampler.NONE, Undersampler.RANDOM)
         if (o, u) != (Oversampler.NONE, Undersampler.NONE)]


@settings(max_examples=60, deadline=None)
@given(P=st.integers(1, 20), M=st.integers(1, 120), ratio=st.sampled_from([1.0, 1.5, 2.0, 3.0]),
       plan=st.sampled_from(PLANS), seed=st.integers(0, 10**6))
def test_balance_ratio_and_originals(P, M, ratio, plan, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(P + M, 2))
    d = make_dataset(X, [1] * P + [0] * M)
    out = balance(d, ResamplingPlan(plan[0], plan[1], ratio, seed=seed))
    p, m = out.positive_count, out.negative_count
    if M >= P:
        assert p - 1 <= m <= ratio * p + 1
    # original rows keep their values and labels
    orig = {tuple(r): lab for r, lab in zip(d.features.tolist(), d.labels.tolist())}
    for r, lab, syn in zip(out.features.tolist(), out.labels.tolist(), out.synthetic_mask):
        if not syn:
            assert orig[tuple(r)] == lab
        else:
            assert lab == POSITIVE
    again = balance(d, ResamplingPlan(plan[0], plan[1], ratio, seed=seed))
    assert np.array_equal(again.features, out.features)


def test_balance_ncl_with_smote_closes_gap():
    out = balance(nine_to_one(2), ResamplingPlan(Oversampler.SMOTE, Undersampler.NCL, seed=2))
    assert abs(out.negative_count - out.positive_count) <= 1
    assert out.labels[out.synthetic_mask].tolist() == [POSITIVE] * int(out.synthetic_mask.sum())
    assert NEGATIVE in out.labels

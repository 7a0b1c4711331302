import dataclasses

import numpy as np
import pytest

from gpbag.boosting import BoostedModel, WeakHypothesis, weighted_median_predict_batch
from gpbag.dataset import POSITIVE, DatasetError, SplitSpec, class_partition, stratified_split
from gpbag.ensemble import (EnsembleConfig, EnsembleModel, bag_seeds, build_bag, build_bags, predict,
                            predict_batch, quick_preset, train_ensemble)
from gpbag.gp import GpConfig, const, feature
from gpbag.resampling import Oversampler, ResamplingPlan, Undersampler

from conftest import TINY_GP, make_dataset, margin_2d, separable_2d

NONE_PLAN = ResamplingPlan(Oversampler.NONE, Undersampler.NONE)


def small_cfg(**kw):
    base = dict(bag_count=3, boost_rounds=2, gp=TINY_GP, seed=5)
    base.update(kw)
    return EnsembleConfig(**base)


def const_member(value):
    return BoostedModel([WeakHypothesis(const(value), 0.2, 0.25, 1)], feature_count=1)


def vote_model(values, combine="vote"):
    cfg = EnsembleConfig(bag_count=len(values), combine=combine)
    return EnsembleModel([const_member(v) for v in values], cfg, list(range(len(values))), 1)


# ------------------------------------------------------------------ bags

def test_single_bag_without_resampling_is_balanced():
    d = separable_2d(80, 0)
    bags = build_bags(d, small_cfg(bag_count=1, plan=NONE_PLAN))
    assert len(bags) == 1
    assert bags[0].positive_count == d.positive_count
    assert abs(bags[0].negative_count - bags[0].positive_count) <= 1


def test_forty_bags_on_yeast_are_balanced(yeast):
    train, _ = stratified_split(yeast, SplitSpec(0.5, True, 0))
    bags = build_bags(train, EnsembleConfig(seed=1))
    assert len(bags) == 40
    for b in bags:
        assert abs(b.negative_count - b.positive_count) <= 1
        assert b.positive_count >= train.positive_count


def test_seeds_change_majority_draws():
    d = separable_2d(80, 1)
    a = build_bags(d, small_cfg(seed=1))
    b = build_bags(d, small_cfg(seed=2))
    assert any(not np.array_equal(x.features, y.features) for x, y in zip(a, b))


def test_bag_independence():
    d = separable_2d(80, 2)
    cfg = small_cfg(bag_count=4)
    seeds = bag_seeds(cfg)
    changed = list(seeds)
    changed[2] = 12345
    a, b = build_bags(d, cfg, seeds), build_bags(d, cfg, changed)
    for j in (0, 1, 3):
        assert np.array_equal(a[j].features, b[j].features)
    assert not np.array_equal(a[2].features, b[2].features)


def test_minority_bootstrap_option():
    d = separable_2d(80, 3)
    bag = build_bag(d, small_cfg(per_bag_minority=7, plan=NONE_PLAN), 11)
    assert bag.positive_count == 7 and bag.negative_count == 7


def test_config_validation():
    with pytest.raises(ValueError):
        EnsembleConfig(bag_count=0)
    with pytest.raises(ValueError):
        EnsembleConfig(boost_rounds=0)
    with pytest.raises(ValueError):
        EnsembleConfig(combine="max")


def test_config_dict_round_trip():
    cfg = small_cfg(plan=ResamplingPlan(Oversampler.RANDOM, Undersampler.NCL, 1.5))
    assert EnsembleConfig.from_dict(cfg.to_dict()) == cfg


def test_quick_preset():
    q = quick_preset(EnsembleConfig())
    assert (q.bag_count, q.gp.population_size, q.gp.generations) == (10, 100, 10)


# ------------------------------------------------------------------ voting

def test_unanimous_vote():
    assert predict(vote_model([0.9, 0.8, 0.7]), [0.0]) == (1.0, POSITIVE)


def test_one_of_three():
    s, lab = predict(vote_model([0.9, 0.1, 0.2]), [0.0])
    assert s == pytest.approx(1 / 3) and lab == 0


def test_split_vote_goes_positive():
    assert predict(vote_model([0.9, 0.1]), [0.0]) == (0.5, POSITIVE)


def test_mean_combination():
    s, lab = predict(vote_model([0.9, 0.1, 0.2], "mean"), [0.0])
    assert s == pytest.approx(0.4) and lab == 0


def test_predict_batch_shapes_and_errors():
    m = vote_model([0.9, 0.1, 0.7])
    assert predict_batch(m, np.zeros((0, 1))) == []
    out = predict_batch(m, make_dataset(np.arange(5.0), [1, 0, 0, 0, 0]))
    assert len(out) == 5
    with pytest.raises(DatasetError, match="expects 1 features"):
        m.predict_batch(np.zeros((2, 3)))


# ------------------------------------------------------------------ training

@pytest.fixture(scope="module")
def trained():
    d = separable_2d(80, 4)
    return d, train_ensemble(d, small_cfg())


def test_batch_equals_single_predictions(trained):
    d, m = trained
    rows = d.features[:10]
    batch = predict_batch(m, rows)
    singles = [predict(m, x) for x in rows]
    assert batch == singles


def test_vote_scores_are_multiples_of_one_over_b(trained):
    d, m = trained
    s, lab = m.predict_batch(d)
    B = len(m.members)
    assert np.allclose(s * B, np.round(s * B))
    assert np.array_equal(lab, (s >= 0.5).astype(np.int8))


def test_single_bag_reduces_to_member():
    d = separable_2d(60, 5)
    m = train_ensemble(d, small_cfg(bag_count=1))
    _, member = weighted_median_predict_batch(m.members[0], d.features)
    assert np.array_equal(m.predict_batch(d)[1], member)


def test_training_is_deterministic_and_parallel_safe(trained, tmp_path):
    d, m = trained
    again = train_ensemble(d, small_cfg(), jobs=2)
    assert [x.dumps() for x in again.members] == [x.dumps() for x in m.members]


def test_save_and_load(trained, tmp_path):
    d, m = trained
    m.save(tmp_path / "model")
    files = sorted(p.name for p in (tmp_path / "model").iterdir())
    assert files == ["manifest.json", "member_000.json", "member_001.json", "member_002.json"]
    back = EnsembleModel.load(tmp_path / "model")
    assert back.config == m.config and back.seeds == m.seeds
    assert np.array_equal(back.predict_batch(d)[0], m.predict_batch(d)[0])
    m.save(tmp_path / "again")
    for f in files:
        assert (tmp_path / "model" / f).read_bytes() == (tmp_path / "again" / f).read_bytes()


def test_separable_toy_training_accuracy():
    cfg = EnsembleConfig(bag_count=3, boost_rounds=5,
                         gp=GpConfig(population_size=60, generations=10, subpopulations=6))
    perfect = 0
    for seed in range(5):
        d = margin_2d(60, 10 + seed)
        m = train_ensemble(d, dataclasses.replace(cfg, seed=seed))
        perfect += np.mean(m.predict_batch(d)[1] == d.labels) == 1.0
    assert perfect >= 4


def test_empty_minority():
    d = make_dataset(np.arange(6.0), [0] * 6)
    with pytest.raises(DatasetError):
        train_ensemble(d, small_cfg())
    with pytest.raises(DatasetError):
        class_partition(d)

"""Asymmetric bagging of GP-Boost models.

Every bag takes the training minority (all of it by default, or a
bootstrap), a bootstrap of the majority, and is then rebalanced with a
:class:`~gpbag.resampling.ResamplingPlan`.  One GP-Boost model is trained
per bag, and the members vote.

Bag ``j`` draws everything from ``derive_seed(seed, "bag", j)``, so bags are
independent of each other and of the order in which they are trained.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .boosting import BoostedModel, gpboost_train, weighted_median_predict_batch
from .dataset import NEGATIVE, POSITIVE, Dataset, DatasetError, bootstrap, class_partition, concat
from .gp import GpConfig
from .resampling import Oversampler, ResamplingPlan, Undersampler, balance
from .seeding import derive_seed

MANIFEST = "manifest.json"


@dataclass(frozen=True)
class EnsembleConfig:
    bag_count: int = 40
    per_bag_minority: int | None = None  # None: every minority row, no bootstrap
    per_bag_majority: int | None = None  # None: same as the bag's minority size
    plan: ResamplingPlan = field(default_factory=ResamplingPlan)
    boost_rounds: int = 10
    gp: GpConfig = field(default_factory=GpConfig)
    combine: str = "vote"
    decision_threshold: float = 0.5
    seed: int = 42

    def __post_init__(self):
        if self.bag_count < 1:
            raise ValueError("bag_count must be >= 1")
        if self.boost_rounds < 1:
            raise ValueError("boost_rounds must be >= 1")
        if self.combine not in ("vote", "mean"):
            raise ValueError(f"combine must be 'vote' or 'mean', got {self.combine!r}")
        for name in ("per_bag_minority", "per_bag_majority"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["plan"]["oversampler"] = self.plan.oversampler.value
        d["plan"]["undersampler"] = self.plan.undersampler.value
        d["gp"]["const_range"] = list(self.gp.const_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleConfig":
        d = dict(d)
        plan = ResamplingPlan(**d.pop("plan"))
        g = dict(d.pop("gp"))
        g["const_range"] = tuple(g["const_range"])
        return cls(plan=plan, gp=GpConfig(**g), **d)


def bag_seeds(cfg: EnsembleConfig) -> list[int]:
    return [derive_seed(cfg.seed, "bag", j) for j in range(cfg.bag_count)]


def build_bag(train: Dataset, cfg: EnsembleConfig, bag_seed: int) -> Dataset:
    pos, neg = class_partition(train)
    if cfg.per_bag_minority is None:
        minority = pos
    else:
        minority = bootstrap(pos, cfg.per_bag_minority, seed=derive_seed(bag_seed, "minority"))
    n_major = cfg.per_bag_majority or minority.total
    majority = bootstrap(neg, n_major, seed=derive_seed(bag_seed, "majority"))
    plan = dataclasses.replace(cfg.plan, seed=derive_seed(bag_seed, "balance"))
    return balance(concat([minority, majority]), plan)


def build_bags(train: Dataset, cfg: EnsembleConfig, seeds: Sequence[int] | None = None) -> list[Dataset]:
    """One rebalanced training subset per bag."""
    seeds = bag_seeds(cfg) if seeds is None else list(seeds)
    return [build_bag(train, cfg, s) for s in seeds]


def _train_member(args) -> BoostedModel:
    train, cfg, seed = args
    bag = build_bag(train, cfg, seed)
    gp_cfg = dataclasses.replace(cfg.gp, seed=derive_seed(seed, "gp"))
    model = gpboost_train(bag, cfg.boost_rounds, gp_cfg, seed=derive_seed(seed, "boost"))
    model.decision_threshold = cfg.decision_threshold
    return model


@dataclass
class EnsembleModel:
    members: list[BoostedModel]
    config: EnsembleConfig
    seeds: list[int]
    feature_count: int

    def __post_init__(self):
        if not self.members:
            raise ValueError("an ensemble needs at least one member")

    def predict_batch(self, data) -> tuple[np.ndarray, np.ndarray]:
        """``(scores, labels)`` for every row of a Dataset or feature matrix."""
        X = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(0 if X.size == 0 else 1, -1 if X.size else self.feature_count)
        if X.shape[0] == 0:
            return np.zeros(0), np.zeros(0, dtype=np.int8)
        if X.shape[1] != self.feature_count:
            raise DatasetError(f"model expects {self.feature_count} features, got {X.shape[1]}")
        member_scores = []
        member_labels = []
        for m in self.members:
            s, lab = weighted_median_predict_batch(m, X)
            member_scores.append(s)
            member_labels.append(lab)
        if self.config.combine == "mean":
            score = np.mean(member_scores, axis=0)
        else:
            score = np.mean(member_labels, axis=0, dtype=np.float64)
        label = np.where(score >= 0.5, POSITIVE, NEGATIVE).astype(np.int8)
        return score, label

    def predict(self, x) -> tuple[float, int]:
        s, lab = self.predict_batch(np.asarray(x, dtype=np.float64).reshape(1, -1))
        return float(s[0]), int(lab[0])

    # persistence ----------------------------------------------------------
    def save(self, directory: str | os.PathLike) -> list[str]:
        os.makedirs(directory, exist_ok=True)
        names = []
        for j, m in enumerate(self.members):
            name = f"member_{j:03d}.json"
            with open(os.path.join(directory, name), "w", encoding="utf-8") as fh:
                fh.write(m.dumps())
            names.append(name)
        manifest = {"format": "gpbag-ensemble", "version": __version__,
                    "feature_count": self.feature_count, "config": self.config.to_dict(),
                    "bag_seeds": self.seeds, "members": names}
        with open(os.path.join(directory, MANIFEST), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return names

    @classmethod
    def load(cls, directory: str | os.PathLike) -> "EnsembleModel":
        path = os.path.join(directory, MANIFEST)
        if not os.path.isfile(path):
            raise FileNotFoundError(f"no model manifest at {path}")
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
        if manifest.get("format") != "gpbag-ensemble":
            raise ValueError(f"{path}: not a gpbag ensemble manifest")
        members = []
        for name in manifest["members"]:
            with open(os.path.join(directory, name), encoding="utf-8") as fh:
                members.append(BoostedModel.loads(fh.read()))
        return cls(members, EnsembleConfig.from_dict(manifest["config"]),
                   list(manifest["bag_seeds"]), int(manifest["feature_count"]))


def train_ensemble(train: Dataset, cfg: EnsembleConfig, jobs: int = 1,
                   seeds: Sequence[int] | None = None) -> EnsembleModel:
    """Train one GP-Boost member per bag; ``jobs > 1`` trains bags in worker processes."""
    if train.positive_count == 0 or train.negative_count == 0:
        raise DatasetError("both classes must be present in the training set")
    seeds = bag_seeds(cfg) if seeds is None else list(seeds)
    tasks = [(train, cfg, s) for s in seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            members = list(pool.map(_train_member, tasks))
    else:
        members = [_train_member(t) for t in tasks]
    return EnsembleModel(members, cfg, seeds, train.feature_count)


def predict_batch(m: EnsembleModel, data) -> list[tuple[float, int]]:
    scores, labels = m.predict_batch(data)
    return [(float(s), int(lab)) for s, lab in zip(scores, labels)]


def predict(m: EnsembleModel, x) -> tuple[float, int]:
    return m.predict(x)


# desk-scale budget for smoke runs; not the published configuration
QUICK_GP = {"population_size": 100, "generations": 10, "subpopulations": 20}
QUICK_ENSEMBLE = {"bag_count": 10}


def quick_preset(cfg: EnsembleConfig) -> EnsembleConfig:
    return dataclasses.replace(cfg, gp=dataclasses.replace(cfg.gp, **QUICK_GP), **QUICK_ENSEMBLE)


__all__ = ["EnsembleConfig", "EnsembleModel", "bag_seeds", "build_bag", "build_bags",
           "train_ensemble", "predict", "predict_batch", "quick_preset",
           "Oversampler", "Undersampler", "ResamplingPlan"]

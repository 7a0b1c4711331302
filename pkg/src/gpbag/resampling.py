"""Per-bag class balancing.

Over-sampling of the minority (random duplication or SMOTE) and
under-sampling of the majority (random or the Neighborhood Cleaning Rule).
All neighbour searches are exact Euclidean k-NN with ties broken by the
lower row index.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import (NEGATIVE, POSITIVE, ColumnKind, Dataset, DatasetError,
                      class_partition, concat)
from .seeding import derive_seed


class Oversampler(str, enum.Enum):
    NONE = "none"
    RANDOM = "random"
    SMOTE = "smote"


class Undersampler(str, enum.Enum):
    NONE = "none"
    RANDOM = "random"
    NCL = "ncl"


@dataclass(frozen=True)
class ResamplingPlan:
    oversampler: Oversampler = Oversampler.SMOTE
    undersampler: Undersampler = Undersampler.RANDOM
    target_ratio: float = 1.0
    smote_k: int = 5
    ncl_k: int = 3
    normalize: bool = True
    # explicit majority size for RANDOM under-sampling; None derives it from the ratio
    majority_keep: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "oversampler", Oversampler(self.oversampler))
        object.__setattr__(self, "undersampler", Undersampler(self.undersampler))
        if self.smote_k < 1 or self.ncl_k < 1:
            raise ValueError("smote_k and ncl_k must be >= 1")
        if not self.target_ratio >= 1.0:
            raise ValueError(f"target_ratio must be >= 1, got {self.target_ratio}")


def _scaled(X: np.ndarray, normalize: bool) -> np.ndarray:
    if not normalize:
        return X
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span[span == 0] = 1.0
    return (X - lo) / span


def nearest_neighbors(X: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest other rows of each row (self excluded).

    Ties are resolved toward the lower index, so the result is fully
    deterministic.
    """
    n = X.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    d2 = cdist(X, X, "sqeuclidean")
    np.fill_diagonal(d2, np.inf)
    # stable sort gives the lower-index tie-break
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def random_oversample(minority: Dataset, extra: int, seed: int = 0) -> Dataset:
    """Append ``extra`` uniformly drawn duplicates of minority rows."""
    if minority.total == 0:
        raise DatasetError("cannot oversample an empty minority")
    if extra < 0:
        raise ValueError("extra must be >= 0")
    if extra == 0:
        return minority
    rng = np.random.default_rng(seed)
    pick = rng.integers(0, minority.total, extra)
    added = minority.take(pick)
    return concat([minority, added.with_rows(added.features, added.labels,
                                             np.ones(extra, dtype=bool))])


def smote_samples(X: np.ndarray, extra: int, k: int, rng: np.random.Generator,
                  integer_columns=None, normalize: bool = True):
    """Core SMOTE draw.

    Returns ``(samples, base, neighbor, gap)`` where row ``s`` of ``samples``
    interpolates ``X[base[s]]`` toward ``X[neighbor[s]]`` by ``gap[s]``.
    """
    n = X.shape[0]
    if n < 2:
        raise DatasetError("SMOTE requires >= 2 minority samples")
    if k < 1:
        raise ValueError("k must be >= 1")
    nn = nearest_neighbors(_scaled(X, normalize), min(k, n - 1))
    base = rng.integers(0, n, extra)
    neighbor = nn[base, rng.integers(0, nn.shape[1], extra)]
    gap = rng.random(extra)
    samples = X[base] + gap[:, None] * (X[neighbor] - X[base])
    if integer_columns is not None and np.any(integer_columns):
        samples[:, integer_columns] = np.rint(samples[:, integer_columns])
    return samples, base, neighbor, gap


def smote(minority: Dataset, extra: int, k: int = 5, seed: int = 0,
          normalize: bool = True) -> Dataset:
    """Append ``extra`` SMOTE interpolants; all of them are labelled POSITIVE."""
    if minority.total < 2:
        raise DatasetError("SMOTE requires >= 2 minority samples")
    if extra < 0:
        raise ValueError("extra must be >= 0")
    if extra == 0:
        return minority
    int_cols = np.array([c is ColumnKind.INTEGER for c in minority.column_kinds])
    samples, *_ = smote_samples(minority.features, extra, k, np.random.default_rng(seed),
                                int_cols, normalize)
    added = minority.with_rows(samples, np.full(extra, POSITIVE, dtype=np.int8),
                               np.ones(extra, dtype=bool))
    return concat([minority, added])


def random_undersample(majority: Dataset, keep: int, seed: int = 0) -> Dataset:
    """Uniform sample of ``keep`` rows without replacement (source order kept)."""
    if not 1 <= keep <= majority.total:
        raise DatasetError(f"keep must be in [1, {majority.total}], got {keep}")
    rng = np.random.default_rng(seed)
    return majority.take(np.sort(rng.choice(majority.total, keep, replace=False)))


def ncl_clean(combined: Dataset, k: int = 3, normalize: bool = True) -> Dataset:
    """Neighborhood Cleaning Rule.

    A NEGATIVE row goes when most of its k neighbours are POSITIVE; a
    POSITIVE row that its neighbours would misclassify takes its NEGATIVE
    neighbours with it.  POSITIVE rows are never removed.
    """
    if combined.positive_count == 0 or combined.negative_count == 0:
        raise DatasetError("both classes must be present")
    if k >= combined.total:
        raise DatasetError(f"k={k} must be smaller than the row count {combined.total}")
    nn = nearest_neighbors(_scaled(combined.features, normalize), k)
    y = combined.labels
    pos_votes = (y[nn] == POSITIVE).sum(axis=1)
    neg_votes = k - pos_votes
    drop = (y == NEGATIVE) & (2 * pos_votes > k)
    for i in np.flatnonzero((y == POSITIVE) & (2 * neg_votes > k)):
        nbrs = nn[i]
        drop[nbrs[y[nbrs] == NEGATIVE]] = True
    return combined.take(np.flatnonzero(~drop))


def _shuffle(d: Dataset, seed: int) -> Dataset:
    return d.take(np.random.default_rng(seed).permutation(d.total))


def balance(bag: Dataset, plan: ResamplingPlan) -> Dataset:
    """Rebalance ``bag`` so majority/minority lands in ``[1, target_ratio]``.

    Majority under-sampling runs first, then over-sampling closes whatever
    gap is left.  When both random under-sampling and an over-sampler are
    active, the majority is cut halfway toward the target so that both
    stages do some of the work.  NCL only removes noisy rows and does not
    aim at a count; without an over-sampler the ratio after NCL may stay
    above the target.
    """
    pos, neg = class_partition(bag)
    P, M = pos.total, neg.total
    r = plan.target_ratio
    over, under = plan.oversampler, plan.undersampler
    if plan.majority_keep is not None and not 1 <= plan.majority_keep <= M:
        raise DatasetError(f"majority_keep must be in [1, {M}], got {plan.majority_keep}")
    if over is Oversampler.NONE and under is Undersampler.NONE:
        return bag
    explicit = under is Undersampler.RANDOM and plan.majority_keep is not None
    if P <= M <= r * P and not explicit:
        return bag
    if M < P and not explicit:
        # inverted bag: nothing in this plan shrinks the minority
        return bag

    if under is Undersampler.RANDOM and plan.majority_keep is not None:
        neg = random_undersample(neg, plan.majority_keep, derive_seed(plan.seed, "undersample"))
    elif under is Undersampler.RANDOM:
        if over is Oversampler.NONE:
            keep = max(P, math.floor(r * P))
        else:
            keep = max(P, (M + math.floor(r * P)) // 2)
        neg = random_undersample(neg, min(keep, M), derive_seed(plan.seed, "undersample"))
    elif under is Undersampler.NCL:
        cleaned = ncl_clean(concat([pos, neg]), plan.ncl_k, plan.normalize)
        pos, neg = class_partition(cleaned)

    M = neg.total
    if over is not Oversampler.NONE and M > r * P:
        extra = math.ceil(M / r) - P
        oseed = derive_seed(plan.seed, "oversample")
        if over is Oversampler.SMOTE and P >= 2:
            pos = smote(pos, extra, plan.smote_k, oseed, plan.normalize)
        else:
            pos = random_oversample(pos, extra, oseed)
    return _shuffle(concat([pos, neg]), derive_seed(plan.seed, "shuffle"))

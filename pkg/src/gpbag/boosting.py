"""Boosting trainers and their combiners.

Two learners live here:

* AdaBoost.M1 over depth-1 decision stumps, used as the plain baseline.
  Predictions are a ``log(1/beta)``-weighted vote between the two labels.
* GP-Boost: each round bootstraps the training set in proportion to the
  sample weights, evolves a program on the draw, scores it on the full
  set with a max-normalised absolute loss and reweights by
  ``w_i <- w_i * beta ** (1 - L_i)``.  Rounds are combined with a
  ``log(1/beta)``-weighted median of the clamped program outputs.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import gp
from .dataset import NEGATIVE, POSITIVE, Dataset, DatasetError, bootstrap_indices
from .seeding import derive_seed

LABEL_ENCODING = {"POSITIVE": 1.0, "NEGATIVE": 0.0}
# relative slack on the weighted-median half-mass test, absorbs summation order
MEDIAN_RTOL = 1e-12


@dataclass(frozen=True)
class Stump:
    """Predicts POSITIVE when ``polarity * (x[feature] - threshold) > 0``."""
    feature: int
    threshold: float
    polarity: int = 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return (self.polarity * (X[:, self.feature] - self.threshold) > 0).astype(np.int8)


def fit_stump(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[Stump, float]:
    """Exhaustive search for the stump with the lowest weighted 0-1 error."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    w = np.asarray(w, dtype=np.float64)
    total = w.sum()
    pos_w = np.where(y == POSITIVE, w, 0.0)
    neg_w = w - pos_w
    best = (math.inf, None)
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        # error if everything <= threshold is NEGATIVE and the rest POSITIVE
        cum_pos = np.concatenate([[0.0], np.cumsum(pos_w[order])])
        cum_neg = np.concatenate([[0.0], np.cumsum(neg_w[order])])
        err_up = cum_pos + (neg_w.sum() - cum_neg)
        err_down = total - err_up
        # candidate cut k puts the first k sorted rows at or below the threshold
        valid = np.ones(xs.size + 1, dtype=bool)
        valid[1:-1] = xs[1:] > xs[:-1]
        for errs, pol in ((err_up, 1), (err_down, -1)):
            e = np.where(valid, errs, math.inf)
            k = int(np.argmin(e))
            if e[k] < best[0] - 1e-15:
                if k == 0:
                    thr = xs[0] - 1.0
                elif k == xs.size:
                    thr = xs[-1]
                else:
                    thr = 0.5 * (xs[k - 1] + xs[k])
                best = (float(e[k]), Stump(j, float(thr), pol))
    return best[1], max(0.0, best[0] / total)


@dataclass(frozen=True)
class WeakHypothesis:
    model: gp.Program | Stump
    epsilon: float
    beta: float
    round: int

    @property
    def usable(self) -> bool:
        return 0.0 <= self.beta < 1.0


@dataclass(frozen=True)
class RoundLoss:
    per_sample_loss: np.ndarray
    mean_loss: float


@dataclass
class BoostedModel:
    hypotheses: list[WeakHypothesis]
    kind: str = "gpboost"
    decision_threshold: float = 0.5
    feature_count: int | None = None
    # per-round training events, including discarded rounds
    log: list[dict] = field(default_factory=list)

    label_encoding = LABEL_ENCODING

    def __post_init__(self):
        if not self.hypotheses:
            raise ValueError("a boosted model needs at least one hypothesis")
        if self.kind not in ("gpboost", "adaboost"):
            raise ValueError(f"unknown model kind {self.kind!r}")

    def predict(self, X) -> np.ndarray:
        if self.kind == "adaboost":
            return adaboost_predict_batch(self, X)
        return weighted_median_predict_batch(self, X)[1]

    def scores(self, X) -> np.ndarray:
        if self.kind == "adaboost":
            return adaboost_scores(self, X)
        return weighted_median_predict_batch(self, X)[0]

    # persistence ----------------------------------------------------------
    def to_dict(self) -> dict:
        rounds = []
        for h in self.hypotheses:
            r = {"round": h.round, "epsilon": h.epsilon, "beta": h.beta}
            if isinstance(h.model, Stump):
                r["stump"] = {"feature": h.model.feature, "threshold": h.model.threshold,
                              "polarity": h.model.polarity}
            else:
                r["program"] = gp.to_sexpr(h.model)
            rounds.append(r)
        return {"kind": self.kind, "decision_threshold": self.decision_threshold,
                "feature_count": self.feature_count, "label_encoding": dict(LABEL_ENCODING),
                "rounds": rounds}

    @classmethod
    def from_dict(cls, d: dict) -> "BoostedModel":
        hyps = []
        for r in d["rounds"]:
            if "stump" in r:
                s = r["stump"]
                model = Stump(int(s["feature"]), float(s["threshold"]), int(s["polarity"]))
            else:
                model = gp.from_sexpr(r["program"])
            hyps.append(WeakHypothesis(model, float(r["epsilon"]), float(r["beta"]), int(r["round"])))
        return cls(hyps, d["kind"], float(d["decision_threshold"]), d.get("feature_count"))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def loads(cls, text: str) -> "BoostedModel":
        return cls.from_dict(json.loads(text))


# -------------------------------------------------------------- AdaBoost.M1

def weighted_error(predictions, truth, weights) -> float:
    """Weighted 0-1 error under normalised weights."""
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    w = np.asarray(weights, dtype=np.float64)
    return float(np.sum(w[predictions != truth]))


def beta_of(epsilon: float) -> float:
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must be in [0, 1), got {epsilon}")
    return epsilon / (1 - epsilon)  # int 1 keeps Fraction input exact


def adaboost_m1_train(train: Dataset, rounds: int = 10, seed: int = 0,
                      trace: list | None = None) -> BoostedModel:
    """AdaBoost.M1 with decision stumps.

    Correctly classified samples are scaled by beta and the weights are
    renormalised.  A round with zero error is kept and ends training; a
    round with error >= 0.5 is dropped, the weights are reset to uniform
    and the round is retried once before training stops.  ``seed`` is
    accepted for interface symmetry; stump fitting is deterministic.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if train.positive_count == 0 or train.negative_count == 0:
        raise DatasetError("AdaBoost.M1 needs both classes in the training set")
    X, y = train.features, train.labels
    n = train.total
    w = np.full(n, 1.0 / n)
    hyps: list[WeakHypothesis] = []
    log: list[dict] = []
    retried = False
    t = 1
    while t <= rounds:
        stump, _ = fit_stump(X, y, w)
        pred = stump.predict(X)
        eps = weighted_error(pred, y, w)
        if eps >= 0.5:
            log.append({"round": t, "epsilon": eps, "status": "discarded"})
            if retried:
                break
            retried = True
            w = np.full(n, 1.0 / n)
            continue
        beta = beta_of(eps)
        hyps.append(WeakHypothesis(stump, eps, beta, len(hyps) + 1))
        log.append({"round": t, "epsilon": eps, "beta": beta, "status": "kept"})
        if eps == 0.0:
            break
        w = np.where(pred == y, w * beta, w)
        w /= w.sum()
        if trace is not None:
            trace.append(w.copy())
        t += 1
    if not hyps:
        # every attempt failed: fall back to the uniform-weight stump
        stump, eps = fit_stump(X, y, np.full(n, 1.0 / n))
        hyps.append(WeakHypothesis(stump, eps, math.inf if eps >= 1 else beta_of(eps), 1))
    return BoostedModel(hyps, "adaboost", feature_count=train.feature_count, log=log)


def _vote_masses(m: BoostedModel, X) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    pos = np.zeros(X.shape[0])
    neg = np.zeros(X.shape[0])
    usable = [h for h in m.hypotheses if h.usable] or [min(m.hypotheses, key=lambda h: h.epsilon)]
    for h in usable:
        mass = math.log(1.0 / h.beta) if 0.0 < h.beta < 1.0 else (math.inf if h.beta == 0 else 1.0)
        p = h.model.predict(X)
        pos += np.where(p == POSITIVE, mass, 0.0)
        neg += np.where(p == POSITIVE, 0.0, mass)
    return pos, neg


def adaboost_predict_batch(m: BoostedModel, X) -> np.ndarray:
    pos, neg = _vote_masses(m, X)
    both_inf = np.isinf(pos) & np.isinf(neg)
    return np.where(both_inf | (pos >= neg), POSITIVE, NEGATIVE).astype(np.int8)


def adaboost_predict(m: BoostedModel, x) -> int:
    """Label with the larger summed ``log(1/beta)``; ties go to POSITIVE."""
    return int(adaboost_predict_batch(m, np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def adaboost_scores(m: BoostedModel, X) -> np.ndarray:
    """Share of the vote mass that went to POSITIVE."""
    pos, neg = _vote_masses(m, X)
    with np.errstate(invalid="ignore"):
        s = pos / (pos + neg)
    s[np.isinf(pos) & ~np.isinf(neg)] = 1.0
    s[~np.isinf(pos) & np.isinf(neg)] = 0.0
    return np.nan_to_num(s, nan=0.5)


# ------------------------------------------------------------------ GP-Boost

def _exact(values) -> bool:
    if isinstance(values, np.ndarray) and values.dtype != object:
        return False
    return any(isinstance(v, Fraction) for v in np.asarray(values, dtype=object).ravel())


def round_loss_from_outputs(outputs, targets, weights) -> RoundLoss:
    """Max-normalised absolute loss of clamped outputs and its weighted mean.

    Passing :class:`fractions.Fraction` values anywhere switches the whole
    computation to exact rational arithmetic.
    """
    if any(_exact(v) for v in (outputs, targets, weights)):
        conv = np.vectorize(Fraction, otypes=[object])
        outputs, targets, weights = (conv(np.asarray(v, dtype=object)) for v in (outputs, targets, weights))
        zero, one = Fraction(0), Fraction(1)
    else:
        outputs, targets, weights = (np.asarray(v, dtype=np.float64) for v in (outputs, targets, weights))
        zero, one = 0.0, 1.0
    r = np.abs(np.minimum(one, np.maximum(zero, outputs)) - targets)
    m = r.max() if r.size else zero
    L = r / m if m > 0 else r * zero
    p = weights / weights.sum()
    return RoundLoss(L, float(L @ p))


def round_loss(h: gp.Program, subset: Dataset, weights) -> RoundLoss:
    if subset.total == 0:
        raise DatasetError("round loss needs a non-empty subset")
    return round_loss_from_outputs(gp.evaluate(h, subset.features), subset.labels, weights)


def gpboost_train(train: Dataset, T: int = 10, gp_cfg: gp.GpConfig | None = None,
                  seed: int = 0, trace: list | None = None) -> BoostedModel:
    """GP-Boost.

    Round ``t`` draws ``N`` rows with probabilities ``w_i / sum(w)``, evolves
    a program on them (unit case weights, duplicates carry the emphasis),
    scores it on all ``N`` training rows and updates
    ``w_i <- w_i * beta ** (1 - L_i)``.  Weights are rescaled to sum to N
    after each update, which leaves the sampling probabilities unchanged.

    A round whose mean loss is 0 is recorded and ends training.  A round
    with mean loss >= 0.5 is dropped, the weights are reset and the round
    is retried once before training stops; such rounds are only kept when
    no usable round exists at all.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if train.positive_count == 0 or train.negative_count == 0:
        raise DatasetError("GP-Boost needs both classes in the training set")
    gp_cfg = gp_cfg or gp.GpConfig()
    X = train.features
    y = train.labels.astype(np.float64)
    N = train.total
    w = np.ones(N)
    hyps: list[WeakHypothesis] = []
    failed: list[WeakHypothesis] = []
    log: list[dict] = []
    retried = False
    attempt = 0
    t = 1
    while t <= T:
        idx = bootstrap_indices(N, N, w, derive_seed(seed, "round", t, attempt, "sample"))
        result = gp.evolve(X[idx], y[idx], np.ones(N), gp_cfg,
                           seed=derive_seed(seed, "round", t, attempt, "gp"))
        loss = round_loss_from_outputs(gp.evaluate(result.best, X), y, w)
        L_bar = loss.mean_loss
        if L_bar >= 0.5:
            log.append({"round": t, "attempt": attempt, "mean_loss": L_bar,
                        "beta": L_bar / (1 - L_bar) if L_bar < 1 else math.inf,
                        "gp_fitness": result.best_fitness, "status": "discarded"})
            failed.append(WeakHypothesis(result.best, L_bar,
                                         L_bar / (1 - L_bar) if L_bar < 1 else math.inf, t))
            if retried:
                break
            retried = True
            attempt += 1
            w = np.ones(N)
            continue
        beta = L_bar / (1.0 - L_bar)
        hyps.append(WeakHypothesis(result.best, L_bar, beta, len(hyps) + 1))
        log.append({"round": t, "attempt": attempt, "mean_loss": L_bar, "beta": beta,
                    "gp_fitness": result.best_fitness, "status": "kept"})
        if L_bar == 0.0:
            break
        w = w * beta ** (1.0 - loss.per_sample_loss)
        w *= N / w.sum()
        if trace is not None:
            trace.append((w.copy(), loss.per_sample_loss.copy(), beta))
        t += 1
    if not hyps:
        hyps = [min(failed, key=lambda h: h.epsilon)]
    return BoostedModel(hyps, "gpboost", feature_count=train.feature_count, log=log)


def weighted_median(values, betas) -> float:
    """Smallest value whose cumulative ``log(1/beta)`` mass reaches half the total.

    Values are sorted ascending; the cumulative mass counts every value at
    or below the candidate.  ``betas`` must lie in (0, 1).
    """
    v = np.asarray(values, dtype=np.float64)
    b = np.asarray(betas, dtype=np.float64)
    return float(weighted_median_columns(v[:, None], b)[0])


def weighted_median_columns(values: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """Column-wise :func:`weighted_median` of a ``(T, n)`` matrix."""
    logw = np.log(1.0 / np.asarray(betas, dtype=np.float64))
    order = np.argsort(values, axis=0, kind="stable")
    sv = np.take_along_axis(values, order, axis=0)
    cum = np.cumsum(logw[order], axis=0)
    total = logw.sum()
    reached = 2.0 * cum >= total * (1.0 - MEDIAN_RTOL)
    first = np.argmax(reached, axis=0)
    return sv[first, np.arange(values.shape[1])]


def _median_members(m: BoostedModel) -> tuple[list[WeakHypothesis], np.ndarray]:
    perfect = [h for h in m.hypotheses if h.beta == 0.0]
    if perfect:
        # zero-loss rounds carry unbounded weight; they outvote everything else
        return perfect, np.full(len(perfect), 0.5)
    usable = [h for h in m.hypotheses if 0.0 < h.beta < 1.0]
    if usable:
        return usable, np.array([h.beta for h in usable])
    best = min(m.hypotheses, key=lambda h: h.epsilon)
    return [best], np.array([0.5])


def weighted_median_predict_batch(m: BoostedModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Scores and labels for every row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    members, betas = _median_members(m)
    outputs = gp.clamp01(gp.evaluate_many([h.model for h in members], X))
    score = weighted_median_columns(outputs, betas)
    label = np.where(score >= m.decision_threshold, POSITIVE, NEGATIVE).astype(np.int8)
    return score, label


def weighted_median_predict(m: BoostedModel, x) -> tuple[float, int]:
    s, lab = weighted_median_predict_batch(m, np.asarray(x, dtype=np.float64).reshape(1, -1))
    return float(s[0]), int(lab[0])

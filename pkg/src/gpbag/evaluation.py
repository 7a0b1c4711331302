"""Metrics and experiment protocols.

POSITIVE is the minority class throughout: "minority accuracy" is the
true-positive rate and "majority accuracy" the true-negative rate.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import binomtest, rankdata

from .boosting import BoostedModel, adaboost_m1_train
from .dataset import NEGATIVE, POSITIVE, Dataset, DatasetError, SplitSpec, stratified_split
from .ensemble import EnsembleConfig, EnsembleModel, train_ensemble
from .seeding import derive_seed

DEFAULT_FRACTIONS = (0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 0.9)

REPORT_COLUMNS = ["kind", "method", "dataset", "train_fraction", "repeat", "seed",
                  "tp", "fn", "fp", "tn", "minority_accuracy", "majority_accuracy",
                  "overall_accuracy", "auc", "error_count"]
MEAN_COLUMNS = ["minority_accuracy", "majority_accuracy", "overall_accuracy", "auc", "error_count"]


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.fp + self.tn

    @property
    def total(self) -> int:
        return self.positives + self.negatives


def confusion(predictions, truth) -> ConfusionMatrix:
    p = np.asarray(predictions)
    t = np.asarray(truth)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} predictions vs {t.shape} labels")
    if p.size == 0:
        raise ValueError("empty predictions")
    pos = t == POSITIVE
    hit = p == t
    return ConfusionMatrix(tp=int(np.sum(pos & hit)), fn=int(np.sum(pos & ~hit)),
                           fp=int(np.sum(~pos & ~hit)), tn=int(np.sum(~pos & hit)))


def auc(scores, truth) -> float:
    """Area under the ROC curve via the Mann-Whitney rank sum (ties count half)."""
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(truth)
    if s.shape != t.shape:
        raise ValueError("scores and labels differ in length")
    pos = t == POSITIVE
    P = int(pos.sum())
    N = s.size - P
    if P == 0 or N == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    ranks = rankdata(s)
    return float((ranks[pos].sum() - P * (P + 1) / 2.0) / (P * N))


@dataclass(frozen=True)
class EvaluationReport:
    confusion: ConfusionMatrix
    minority_accuracy: float
    majority_accuracy: float
    overall_accuracy: float
    auc: float
    error_count: int
    seed: int | None = None
    train_fraction: float | None = None
    method: str = "ensemble"
    dataset: str = ""
    repeat: int | None = None

    def row(self) -> dict:
        c = self.confusion
        return {"kind": "run", "method": self.method, "dataset": self.dataset,
                "train_fraction": self.train_fraction, "repeat": self.repeat, "seed": self.seed,
                "tp": c.tp, "fn": c.fn, "fp": c.fp, "tn": c.tn,
                "minority_accuracy": self.minority_accuracy,
                "majority_accuracy": self.majority_accuracy,
                "overall_accuracy": self.overall_accuracy, "auc": self.auc,
                "error_count": self.error_count}


def report_from(scores, labels, truth, **meta) -> EvaluationReport:
    c = confusion(labels, truth)
    if c.positives == 0 or c.negatives == 0:
        raise DatasetError("evaluation needs both classes in the test set")
    return EvaluationReport(confusion=c, minority_accuracy=c.tp / c.positives,
                            majority_accuracy=c.tn / c.negatives,
                            overall_accuracy=(c.tp + c.tn) / c.total,
                            auc=auc(scores, truth), error_count=c.fn + c.fp, **meta)


def score_and_label(model, X) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(model, EnsembleModel):
        return model.predict_batch(X)
    if isinstance(model, BoostedModel):
        return model.scores(X), model.predict(X)
    return model.predict_batch(X)


def evaluate(model, test: Dataset, **meta) -> EvaluationReport:
    """Score ``model`` on ``test``; AUC uses the model's real-valued scores."""
    if test.total == 0:
        raise DatasetError("empty test set")
    scores, labels = score_and_label(model, test.features)
    meta.setdefault("dataset", test.name)
    return report_from(scores, labels, test.labels, **meta)


# ------------------------------------------------------------------ protocols

def _fraction_key(f: float) -> int:
    return int(round(f * 1_000_000))


def _sweep_cell(args) -> EvaluationReport:
    d, cfg, f, r, seed = args
    split_seed = derive_seed(seed, "split", _fraction_key(f), r)
    train, test = stratified_split(d, SplitSpec(f, True, split_seed))
    model_cfg = dataclasses.replace(cfg, seed=derive_seed(seed, "model", _fraction_key(f), r))
    model = train_ensemble(train, model_cfg)
    return evaluate(model, test, seed=split_seed, train_fraction=f, repeat=r, dataset=d.name)


def _run_cells(cells, jobs):
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_cell, cells))
    return [_sweep_cell(c) for c in cells]


def aggregate(reports: Sequence[EvaluationReport]) -> dict:
    """Arithmetic mean and sample standard deviation of each metric."""
    out = {"n": len(reports)}
    for col in MEAN_COLUMNS:
        vals = np.array([getattr(r, col) for r in reports], dtype=np.float64)
        out[col] = float(vals.mean())
        out[col + "_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else math.nan
    return out


@dataclass
class SweepResult:
    rows: list[EvaluationReport]
    means: dict  # train_fraction -> aggregate()

    def best_fraction(self, metric: str = "minority_accuracy") -> float:
        return max(self.means, key=lambda f: (self.means[f][metric], -f))


def sweep_train_fraction(d: Dataset, fractions: Sequence[float], cfg: EnsembleConfig,
                         repeats: int = 1, jobs: int = 1, seed: int | None = None) -> SweepResult:
    """Train and evaluate at every (fraction, repeat) cell."""
    if not fractions:
        raise ValueError("no train fractions given")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    for f in fractions:
        if not 0.0 < f < 1.0:
            raise ValueError(f"train fraction must be in (0, 1), got {f}")
    seed = cfg.seed if seed is None else seed
    cells = [(d, cfg, float(f), r, seed) for f in fractions for r in range(repeats)]
    rows = _run_cells(cells, jobs)
    means = {}
    for f in fractions:
        means[float(f)] = aggregate([r for r in rows if r.train_fraction == float(f)])
    return SweepResult(rows, means)


def compare_baseline(d: Dataset, cfg: EnsembleConfig, repeats: int = 5,
                     train_fraction: float = 0.5, baseline_rounds: int | None = None,
                     seed: int | None = None, jobs: int = 1) -> list[EvaluationReport]:
    """The ensemble and plain AdaBoost.M1-stump on identical splits.

    Returns rows in pairs (ensemble, baseline) per repeat, sharing a split
    seed.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    seed = cfg.seed if seed is None else seed
    cells = [(d, cfg, train_fraction, r, seed) for r in range(repeats)]
    ens_rows = _run_cells(cells, jobs)
    rows = []
    for r, ens in enumerate(ens_rows):
        train, test = stratified_split(d, SplitSpec(train_fraction, True, ens.seed))
        base = adaboost_m1_train(train, baseline_rounds or cfg.boost_rounds)
        rows.append(ens)
        rows.append(evaluate(base, test, seed=ens.seed, train_fraction=train_fraction,
                             repeat=r, method="adaboost_m1_stump", dataset=d.name))
    return rows


def sign_test(rows: Sequence[EvaluationReport], metric: str = "minority_accuracy",
              method: str = "ensemble", baseline: str = "adaboost_m1_stump") -> dict:
    """Paired wins of ``method`` over ``baseline`` on ``metric``."""
    by_repeat: dict = {}
    for r in rows:
        by_repeat.setdefault(r.repeat, {})[r.method] = getattr(r, metric)
    wins = losses = ties = 0
    for pair in by_repeat.values():
        a, b = pair[method], pair[baseline]
        if a > b:
            wins += 1
        elif a < b:
            losses += 1
        else:
            ties += 1
    n = wins + losses
    p = binomtest(wins, n, 0.5, alternative="greater").pvalue if n else 1.0
    return {"wins": wins, "losses": losses, "ties": ties, "pairs": len(by_repeat), "p_value": p}


# -------------------------------------------------------------------- output

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_reports_csv(path: str | os.PathLike, rows: Sequence[EvaluationReport],
                      means: dict | None = None) -> None:
    """One ``run`` row per report, then one ``mean`` row per fraction."""
    columns = REPORT_COLUMNS + [c + "_std" for c in MEAN_COLUMNS] + ["n"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.row().items()})
        for f, agg in (means or {}).items():
            mean_row = {"kind": "mean", "method": rows[0].method if rows else "",
                        "dataset": rows[0].dataset if rows else "", "train_fraction": f}
            mean_row.update(agg)
            w.writerow({k: _fmt(v) for k, v in mean_row.items()})


def write_summary(path: str | os.PathLike, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def format_table(rows: Sequence[EvaluationReport]) -> str:
    """Minority/majority accuracy table, one line per row."""
    lines = [f"{'method':<20} {'frac':>5} {'rep':>3} {'Minority':>9} {'Majority':>9} "
             f"{'Overall':>8} {'AUC':>6} {'errors':>6}"]
    for r in rows:
        frac = "" if r.train_fraction is None else f"{r.train_fraction:.2f}"
        rep = "" if r.repeat is None else str(r.repeat)
        lines.append(f"{r.method:<20} {frac:>5} {rep:>3} {100 * r.minority_accuracy:>8.2f}% "
                     f"{100 * r.majority_accuracy:>8.2f}% {100 * r.overall_accuracy:>7.2f}% "
                     f"{r.auc:>6.3f} {r.error_count:>6d}")
    return "\n".join(lines)


def sweep_shape_warning(result: SweepResult, limit: float = 0.6) -> str | None:
    """Message when the best mean minority accuracy sits above ``limit``."""
    best = result.best_fraction()
    if best <= limit + 1e-12:
        return None
    msg = (f"best mean minority accuracy at train fraction {best:.2f} (> {limit:.2f}); "
           "expected the peak at or below this limit")
    warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return msg

"""Two-class tabular datasets: loading, summaries, splits and bootstraps.

Labels are stored as an ``int8`` array with ``POSITIVE == 1`` (the minority
class) and ``NEGATIVE == 0``.  A :class:`Dataset` is immutable: its arrays
are flagged read-only, and every operation returns a new instance.
"""

from __future__ import annotations

import csv
import enum
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

POSITIVE = 1
NEGATIVE = 0


class DatasetError(ValueError):
    """Raised for malformed input files or invalid dataset operations."""


class ColumnKind(str, enum.Enum):
    REAL = "real"
    INTEGER = "integer"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    column_kinds: tuple[ColumnKind, ...] = ()
    name: str = ""
    feature_names: tuple[str, ...] = ()
    # rows created by resampling (duplicates or SMOTE interpolants)
    synthetic: np.ndarray | None = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else X.reshape(0, 1)
        if X.ndim != 2:
            raise DatasetError("features must be a 2-D matrix")
        y = np.asarray(self.labels, dtype=np.int8).reshape(-1)
        if y.shape[0] != X.shape[0]:
            raise DatasetError(
                f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if X.shape[1] < 1:
            raise DatasetError("dataset needs at least one feature column")
        if not np.all(np.isfinite(X)):
            raise DatasetError("features contain missing or non-finite values")
        if y.size and not np.all((y == POSITIVE) | (y == NEGATIVE)):
            raise DatasetError("labels must be POSITIVE (1) or NEGATIVE (0)")
        kinds = tuple(ColumnKind(k) for k in self.column_kinds) or (ColumnKind.REAL,) * X.shape[1]
        if len(kinds) != X.shape[1]:
            raise DatasetError("column_kinds length does not match feature count")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DatasetError("feature_names length does not match feature count")
        syn = self.synthetic
        if syn is not None:
            syn = np.asarray(syn, dtype=bool).reshape(-1)
            if syn.shape[0] != y.shape[0]:
                raise DatasetError("synthetic mask length does not match row count")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "column_kinds", kinds)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "synthetic", None if syn is None else _frozen(syn))

    @property
    def total(self) -> int:
        return int(self.labels.shape[0])

    @property
    def feature_count(self) -> int:
        return int(self.features.shape[1])

    @property
    def positive_count(self) -> int:
        return int(np.count_nonzero(self.labels == POSITIVE))

    @property
    def negative_count(self) -> int:
        return self.total - self.positive_count

    @property
    def synthetic_mask(self) -> np.ndarray:
        if self.synthetic is None:
            return np.zeros(self.total, dtype=bool)
        return self.synthetic

    def take(self, index) -> "Dataset":
        """Rows at ``index`` (integer array or boolean mask), in that order."""
        index = np.asarray(index)
        syn = None if self.synthetic is None else self.synthetic[index]
        return Dataset(self.features[index], self.labels[index], self.column_kinds,
                       self.name, self.feature_names, syn)

    def with_rows(self, features, labels, synthetic) -> "Dataset":
        """Same schema, new rows."""
        return Dataset(features, labels, self.column_kinds, self.name,
                       self.feature_names, synthetic)

    def __len__(self) -> int:
        return self.total


def concat(parts: Sequence[Dataset]) -> Dataset:
    """Stack datasets sharing one schema."""
    if not parts:
        raise DatasetError("nothing to concatenate")
    first = parts[0]
    syn = None
    if any(p.synthetic is not None for p in parts):
        syn = np.concatenate([p.synthetic_mask for p in parts])
    return first.with_rows(np.vstack([p.features for p in parts]),
                           np.concatenate([p.labels for p in parts]), syn)


@dataclass(frozen=True)
class DatasetSummary:
    total: int
    minority_count: int
    minority_fraction: float
    imbalance_ratio: float
    feature_count: int


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.5
    stratified: bool = True
    seed: int = 42

    def __post_init__(self):
        if not 0.0 < self.train_fraction <= 1.0:
            raise DatasetError(f"train_fraction must be in (0, 1], got {self.train_fraction}")


def _parse_number(cell: str) -> tuple[float, bool]:
    text = cell.strip()
    try:
        return float(int(text)), True
    except ValueError:
        pass
    value = float(text)  # ValueError propagates to caller
    return value, False


def load_csv(path: str | os.PathLike, label_column: str | int = -1,
             positive_label: str = "positive", name: str | None = None) -> Dataset:
    """Read a headed CSV file into a :class:`Dataset`.

    ``label_column`` is a header name or a zero-based index (negative indices
    count from the right).  Rows whose label cell equals ``positive_label``
    become POSITIVE; everything else is NEGATIVE.  A column is typed INTEGER
    when every one of its cells is an integer literal.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise DatasetError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DatasetError(f"{path}: no data rows")

    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if label_column not in header:
            raise DatasetError(f"{path}: label column {label_column!r} not in header")
        label_idx = header.index(label_column)
    else:
        label_idx = int(label_column)
        if not -len(header) <= label_idx < len(header):
            raise DatasetError(f"{path}: label column index {label_idx} out of range")
        label_idx %= len(header)

    feat_idx = [j for j in range(len(header)) if j != label_idx]
    X = np.empty((len(body), len(feat_idx)), dtype=np.float64)
    is_int = np.ones(len(feat_idx), dtype=bool)
    raw_labels = []
    for i, row in enumerate(body):
        line = i + 2  # 1-based, after the header
        if len(row) != len(header):
            raise DatasetError(f"{path}: row {line} has {len(row)} cells, expected {len(header)}")
        raw_labels.append(row[label_idx].strip())
        for out_j, j in enumerate(feat_idx):
            try:
                value, integral = _parse_number(row[j])
            except ValueError:
                raise DatasetError(
                    f"{path}: row {line}, column {header[j]!r}: cannot parse {row[j]!r}") from None
            X[i, out_j] = value
            is_int[out_j] &= integral

    if len(set(raw_labels)) < 2:
        raise DatasetError(f"{path}: fewer than two distinct labels")
    y = np.array([POSITIVE if lab == positive_label else NEGATIVE for lab in raw_labels],
                 dtype=np.int8)
    if not np.any(y == POSITIVE):
        raise DatasetError(f"{path}: positive label {positive_label!r} never occurs")
    kinds = tuple(ColumnKind.INTEGER if f else ColumnKind.REAL for f in is_int)
    return Dataset(X, y, kinds, name or os.path.splitext(os.path.basename(path))[0],
                   tuple(header[j] for j in feat_idx))


def save_csv(d: Dataset, path: str | os.PathLike, label_name: str = "class",
             positive_label: str = "positive", negative_label: str = "negative",
             synthetic_column: bool = False) -> None:
    """Write ``d`` as CSV; floats are written with ``repr`` so reloads are exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = list(d.feature_names) + [label_name]
        if synthetic_column:
            header.append("synthetic")
        w.writerow(header)
        int_cols = [k is ColumnKind.INTEGER for k in d.column_kinds]
        syn = d.synthetic_mask
        for i in range(d.total):
            cells = [str(int(v)) if ic else repr(float(v)) for v, ic in zip(d.features[i], int_cols)]
            cells.append(positive_label if d.labels[i] == POSITIVE else negative_label)
            if synthetic_column:
                cells.append("1" if syn[i] else "0")
            w.writerow(cells)


def canonicalize_labels(d: Dataset) -> Dataset:
    """Swap classes if needed so that POSITIVE is the minority."""
    if d.positive_count <= d.negative_count:
        return d
    return d.with_rows(d.features, 1 - d.labels, d.synthetic)


def summarize(d: Dataset) -> DatasetSummary:
    pos = d.positive_count
    if pos == 0:
        raise DatasetError("no minority class")
    return DatasetSummary(total=d.total, minority_count=pos,
                          minority_fraction=pos / d.total,
                          imbalance_ratio=d.negative_count / pos,
                          feature_count=d.feature_count)


def _require_both_classes(d: Dataset) -> None:
    if d.positive_count == 0 or d.negative_count == 0:
        raise DatasetError("both classes must be present")


def class_partition(d: Dataset) -> tuple[Dataset, Dataset]:
    """Split into (positives, negatives), keeping row order in each part."""
    _require_both_classes(d)
    return d.take(np.flatnonzero(d.labels == POSITIVE)), d.take(np.flatnonzero(d.labels == NEGATIVE))


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Split into (train, test).

    The positive class gets ``round_half_up(f * P)`` training rows and the
    negative class receives the remainder of ``round_half_up(f * N)``, so
    neither count is more than one row away from its exact share.  Both
    outputs keep the source row order.
    """
    _require_both_classes(d)
    f = spec.train_fraction
    rng = np.random.default_rng(spec.seed)
    if f == 1.0:
        return d, d.take(np.zeros(0, dtype=np.intp))

    pos_idx = np.flatnonzero(d.labels == POSITIVE)
    neg_idx = np.flatnonzero(d.labels == NEGATIVE)
    total_train = _round_half_up(f * d.total)
    if spec.stratified:
        n_pos = min(_round_half_up(f * pos_idx.size), pos_idx.size)
        n_neg = min(max(total_train - n_pos, 0), neg_idx.size)
        if n_pos == 0 or n_neg == 0:
            raise DatasetError(f"train_fraction {f} leaves a class without training rows")
        chosen = np.concatenate([rng.permutation(pos_idx)[:n_pos],
                                 rng.permutation(neg_idx)[:n_neg]])
    else:
        chosen = rng.permutation(d.total)[:total_train]
        labels = d.labels[chosen]
        if not (np.any(labels == POSITIVE) and np.any(labels == NEGATIVE)):
            raise DatasetError(f"train_fraction {f} leaves a class without training rows")
    mask = np.zeros(d.total, dtype=bool)
    mask[chosen] = True
    return d.take(np.flatnonzero(mask)), d.take(np.flatnonzero(~mask))


def bootstrap(d: Dataset, n: int, weights=None, seed: int = 0) -> Dataset:
    """Draw ``n`` rows with replacement, uniformly or proportionally to ``weights``."""
    if n < 1:
        raise DatasetError("bootstrap size must be >= 1")
    return d.take(bootstrap_indices(d.total, n, weights, seed))


def bootstrap_indices(size: int, n: int, weights=None, seed: int = 0) -> np.ndarray:
    if size < 1:
        raise DatasetError("cannot bootstrap from an empty dataset")
    rng = np.random.default_rng(seed)
    if weights is None:
        return rng.integers(0, size, n)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (size,):
        raise DatasetError(f"expected {size} weights, got {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DatasetError("weights must be finite and non-negative")
    s = w.sum()
    if s <= 0:
        raise DatasetError("weights sum to zero")
    # inverse-CDF draw keeps zero-weight rows unreachable
    cdf = np.cumsum(w / s)
    idx = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
    return np.minimum(idx, size - 1)

"""Datasets, CSV ingestion, seeded splits and per-group score views."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import CalibrationInputError, ConfigError, DataError, SchemaError, ShapeError

log = logging.getLogger(__name__)


def _readonly(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TabularDataset:
    """Rows of (features, group id, binary label).

    ``group_names`` maps dense ids back to the raw group values, and
    ``feature_names`` labels the feature columns after encoding.
    """

    features: np.ndarray
    groups: np.ndarray
    labels: np.ndarray
    num_groups: int | None = None
    group_names: tuple = ()
    feature_names: tuple = ()

    def __post_init__(self):
        x = np.array(self.features, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        a = np.array(self.groups)
        y = np.array(self.labels)
        if x.ndim != 2:
            raise ShapeError("features must be a 2-d matrix")
        n = x.shape[0]
        if n < 1:
            raise DataError("dataset must contain at least one row")
        if a.shape != (n,) or y.shape != (n,):
            raise ShapeError(
                f"features, groups and labels must share length; got {n}, {a.shape}, {y.shape}")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("labels must be 0 or 1")
        if np.any(a < 0) or not np.all(a == np.round(a)):
            raise DataError("group ids must be nonnegative integers")
        a = a.astype(np.int64)
        k = int(a.max()) + 1 if self.num_groups is None else int(self.num_groups)
        if a.max() >= k:
            raise DataError(f"group id {int(a.max())} out of range for {k} groups")
        object.__setattr__(self, "features", _readonly(x))
        object.__setattr__(self, "groups", _readonly(a))
        object.__setattr__(self, "labels", _readonly(y.astype(np.int8)))
        object.__setattr__(self, "num_groups", k)
        if not self.group_names:
            object.__setattr__(self, "group_names", tuple(range(k)))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def take(self, idx) -> "TabularDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return TabularDataset(self.features[idx], self.groups[idx], self.labels[idx],
                              num_groups=self.num_groups, group_names=self.group_names,
                              feature_names=self.feature_names)

    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.groups, minlength=self.num_groups)


@dataclass(frozen=True, eq=False)
class GroupView:
    """Scores and labels of one group, sorted by descending score."""

    group: int
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float)
        y = np.asarray(self.labels)
        if s.ndim != 1 or s.shape != y.shape:
            raise ShapeError("scores and labels must be 1-d and of equal length")
        if s.size == 0:
            raise CalibrationInputError(f"group {self.group} has no rows")
        order = np.argsort(-s, kind="stable")
        object.__setattr__(self, "scores", _readonly(s[order]))
        object.__setattr__(self, "labels", _readonly(y[order].astype(np.int8)))

    def __len__(self):
        return self.scores.size


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.7
    calib_frac: float = 0.5
    test_frac: float = 0.3
    with_replacement: bool = True
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.calib_frac, self.test_frac)
        if not all(0.0 < f <= 1.0 for f in fracs):
            raise ConfigError(f"split fractions must lie in (0, 1]; got {fracs}")
        if not self.with_replacement and sum(fracs) > 1.0 + 1e-12:
            raise ConfigError("fractions of a partition must sum to at most 1")


@dataclass(frozen=True)
class CSVSchema:
    """Column roles for :func:`load_csv`."""

    label: str
    group: str
    numeric: Sequence[str] = ()
    categorical: Sequence[str] = ()

    def __post_init__(self):
        object.__setattr__(self, "numeric", tuple(self.numeric))
        object.__setattr__(self, "categorical", tuple(self.categorical))
        if not self.numeric and not self.categorical:
            raise SchemaError("schema needs at least one feature column")
        roles = [self.label, self.group, *self.numeric, *self.categorical]
        if len(set(roles)) != len(roles):
            raise SchemaError("a column may carry only one role")


def _parse_label(raw, lineno):
    try:
        v = float(raw)
    except ValueError:
        raise DataError(f"line {lineno}: label {raw!r} is not 0 or 1") from None
    if v not in (0.0, 1.0):
        raise DataError(f"line {lineno}: label {raw!r} is not 0 or 1")
    return int(v)


def load_csv(path, schema: CSVSchema) -> tuple[TabularDataset, dict]:
    """Read a header-first CSV file into a dataset.

    Numeric columns are z-scored with statistics of the loaded file,
    categorical columns are one-hot encoded (categories in first-appearance
    order), and constant columns are dropped with a warning.  Returns the
    dataset and the mapping from raw group value to dense group id.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if not header:
            raise DataError(f"{path}: empty file")
        needed = [schema.label, schema.group, *schema.numeric, *schema.categorical]
        missing = [c for c in needed if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: no data rows")

    group_map: dict[str, int] = {}
    groups, labels = [], []
    for lineno, row in enumerate(rows, start=2):
        labels.append(_parse_label(row[schema.label], lineno))
        groups.append(group_map.setdefault(row[schema.group], len(group_map)))

    columns, names = [], []
    for col in schema.numeric:
        try:
            raw = np.array([float(r[col]) for r in rows])
        except ValueError as exc:
            raise DataError(f"{path}: non-numeric value in column {col!r}: {exc}") from None
        sd = raw.std()
        if not sd > 0:
            log.warning("dropping constant numeric column %r", col)
            continue
        columns.append((raw - raw.mean()) / sd)
        names.append(col)
    for col in schema.categorical:
        values = [r[col] for r in rows]
        cats = list(dict.fromkeys(values))
        if len(cats) < 2:
            log.warning("dropping constant categorical column %r", col)
            continue
        arr = np.array(values, dtype=object)
        for cat in cats:
            columns.append((arr == cat).astype(float))
            names.append(f"{col}={cat}")
    if not columns:
        raise DataError(f"{path}: every feature column is constant")

    ds = TabularDataset(np.column_stack(columns), np.array(groups), np.array(labels),
                        num_groups=len(group_map), group_names=tuple(group_map),
                        feature_names=tuple(names))
    return ds, group_map


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if n < 1:
        raise DataError("cannot split an empty dataset")
    rng = np.random.default_rng(spec.seed)
    sizes = [int(round(f * n)) for f in (spec.train_frac, spec.calib_frac, spec.test_frac)]
    if spec.with_replacement:
        return tuple(rng.integers(0, n, size=m) for m in sizes)
    perm = rng.permutation(n)
    bounds = np.cumsum([0, *sizes])
    if bounds[-1] > n:
        raise ConfigError(f"partition sizes {sizes} exceed {n} rows")
    return tuple(perm[bounds[i]:bounds[i + 1]] for i in range(3))


def split(ds: TabularDataset, spec: SplitSpec):
    """Return (train, calib, test) parts of ``round(frac * n)`` rows each.

    With replacement every part is an independent bootstrap draw, so parts
    may overlap; otherwise the parts come from one seeded permutation.
    """
    return tuple(ds.take(idx) for idx in split_indices(ds.n, spec))


def group_views(ds_or_groups, scores, labels=None) -> dict[int, GroupView]:
    """Partition scores by group into descending-sorted views.

    Accepts a dataset or a raw ``groups`` array (then ``labels`` is required).
    Every group id below the dataset's group count must have rows.
    """
    if isinstance(ds_or_groups, TabularDataset):
        groups, labels, k = ds_or_groups.groups, ds_or_groups.labels, ds_or_groups.num_groups
    else:
        groups = np.asarray(ds_or_groups, dtype=np.int64)
        if labels is None:
            raise ValueError("labels are required when passing raw groups")
        k = int(groups.max()) + 1 if groups.size else 0
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != groups.shape:
        raise ShapeError(f"expected {groups.size} scores, got {scores.size}")
    views = {}
    for a in range(k):
        mask = groups == a
        if not mask.any():
            raise CalibrationInputError(f"group {a} has no rows")
        views[a] = GroupView(a, scores[mask], labels[mask])
    return views


def views_from_mapping(data: Mapping[int, tuple[Sequence[float], Sequence[int]]]) -> dict[int, GroupView]:
    return {int(a): GroupView(int(a), s, y) for a, (s, y) in data.items()}

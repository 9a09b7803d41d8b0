"""Datasets, CSV ingestion and seeded sampling."""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import check_seed, generator


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable feature matrix with encoded labels.

    ``labels[i]`` indexes into ``vocabulary``; the vocabulary order drives every
    tie-break downstream (leaf modes, vote ties, candidate enumeration).
    """

    features: np.ndarray
    labels: np.ndarray
    vocabulary: tuple
    feature_names: tuple = ()
    name: str = ""

    def __post_init__(self):
        X = _frozen(self.features, np.float64)
        y = _frozen(self.labels, np.int64)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        m, n = X.shape
        if m < 1 or n < 1:
            raise DataError(f"dataset needs at least one row and one feature, got {X.shape}")
        if y.shape != (m,):
            raise DataError(f"expected {m} labels, got shape {y.shape}")
        if not np.isfinite(X).all():
            raise DataError("features contain NaN or infinite values")
        vocab = tuple(str(v) for v in self.vocabulary)
        if not vocab:
            raise DataError("empty label vocabulary")
        if len(set(vocab)) != len(vocab):
            raise DataError("duplicate names in label vocabulary")
        if y.min() < 0 or y.max() >= len(vocab):
            raise DataError("label index outside vocabulary")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(n))
        if len(names) != n:
            raise DataError(f"{len(names)} feature names for {n} features")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "vocabulary", vocab)
        object.__setattr__(self, "feature_names", names)

    @property
    def m(self):
        return self.features.shape[0]

    @property
    def n(self):
        return self.features.shape[1]

    @property
    def k(self):
        return len(self.vocabulary)

    def view(self, rows=None):
        if rows is None:
            rows = np.arange(self.m)
        return SampleView(self, rows)

    def replace_features(self, features):
        return Dataset(features, self.labels, self.vocabulary, self.feature_names, self.name)


@dataclass(frozen=True, eq=False)
class SampleView:
    """Ordered selection of rows from a parent dataset; duplicates allowed."""

    parent: Dataset
    row_indices: np.ndarray = field(default=None)

    def __post_init__(self):
        rows = _frozen(self.row_indices, np.int64)
        if rows.ndim != 1 or rows.size < 1:
            raise DataError("a sample view needs at least one row")
        if rows.min() < 0 or rows.max() >= self.parent.m:
            raise DataError("row index outside parent dataset")
        object.__setattr__(self, "row_indices", rows)

    @property
    def t(self):
        return self.row_indices.size

    @property
    def X(self):
        return self.parent.features[self.row_indices]

    @property
    def y(self):
        return self.parent.labels[self.row_indices]

    @property
    def present_labels(self):
        return np.unique(self.y)

    def materialize(self):
        """Copy the selected rows into a standalone :class:`Dataset`."""
        p = self.parent
        return Dataset(self.X, self.y, p.vocabulary, p.feature_names, p.name)


def load_csv(path, label_column="last", has_header=True, name=None):
    """Read a numeric CSV file with one label column.

    ``label_column`` is a header name, ``"last"`` or a 0-based column index.
    Labels are encoded in order of first appearance. Rows are numbered from 1
    (first data row) in error messages.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")

    if has_header:
        header = [h.strip() for h in rows[0]]
        rows = rows[1:]
    else:
        header = [f"x{j}" for j in range(len(rows[0]))]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(header)
    if width < 2:
        raise DataError(f"{path}: need at least one feature column and a label column")

    if label_column == "last":
        label_idx = width - 1
    elif isinstance(label_column, int):
        label_idx = label_column
    elif label_column in header:
        label_idx = header.index(label_column)
    else:
        raise DataError(f"{path}: label column {label_column!r} not found in header {header}")
    if not -width <= label_idx < width:
        raise DataError(f"{path}: label column index {label_idx} out of range")
    label_idx %= width

    feat_cols = [j for j in range(width) if j != label_idx]
    X = np.empty((len(rows), len(feat_cols)))
    vocab = {}
    y = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise DataError(f"{path}: row {i} has {len(row)} cells, expected {width}")
        for out_j, j in enumerate(feat_cols):
            cell = row[j].strip()
            if cell == "" or cell == "?":
                raise DataError(f"{path}: missing value at row {i}, column {header[j]!r}")
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric value {cell!r} at row {i}, column {header[j]!r}"
                ) from None
            if not math.isfinite(v):
                raise DataError(f"{path}: non-finite value at row {i}, column {header[j]!r}")
            X[i - 1, out_j] = v
        label = row[label_idx].strip()
        if label == "":
            raise DataError(f"{path}: missing label at row {i}")
        y[i - 1] = vocab.setdefault(label, len(vocab))

    return Dataset(
        X,
        y,
        tuple(vocab),
        tuple(header[j] for j in feat_cols),
        name or path.stem,
    )


class Standardizer:
    """Per-feature z-scoring fitted on training rows only.

    Zero-variance features are left untouched.
    """

    def __init__(self):
        self.mean_ = None
        self.scale_ = None

    def fit(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] < 1:
            raise DataError("cannot fit a standardizer on zero rows")
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        constant = std == 0
        self.mean_ = np.where(constant, 0.0, self.mean_)
        self.scale_ = np.where(constant, 1.0, std)
        return self

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean_) / self.scale_


def standardize(train, others=()):
    """Fit on ``train`` and transform it plus every view in ``others``.

    Returns ``(standardizer, train_dataset, [other_datasets...])`` where each
    dataset is a materialized, transformed copy of the corresponding view.
    """
    scaler = Standardizer().fit(train.X)
    out = []
    for v in (train, *others):
        d = v.materialize()
        out.append(d.replace_features(scaler.transform(d.features)))
    return scaler, out[0], out[1:]


def bootstrap(dataset, size, seed):
    """Draw ``size`` rows uniformly with replacement."""
    seed = check_seed(seed)
    if size < 1:
        raise ValueError(f"bootstrap size must be >= 1, got {size}")
    rows = generator(seed).integers(0, dataset.m, size=size)
    return SampleView(dataset, rows)


def stratified_kfold(dataset, folds, seed):
    """Split into ``folds`` (train, test) view pairs preserving class ratios.

    Members of each class are shuffled and dealt to folds round-robin, the
    dealing position carrying over from one class to the next so fold sizes
    also stay within one row of each other. Classes smaller than ``folds``
    are spread best-effort; a fold can end up without training rows of them.
    """
    seed = check_seed(seed)
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if folds > dataset.m:
        raise ValueError(f"folds ({folds}) exceeds number of rows ({dataset.m})")
    rng = generator(seed)
    assignment = np.empty(dataset.m, dtype=np.int64)
    pos = 0
    for c in range(dataset.k):
        members = np.flatnonzero(dataset.labels == c)
        rng.shuffle(members)
        assignment[members] = (pos + np.arange(members.size)) % folds
        pos = (pos + members.size) % folds

    pairs = []
    for f in range(folds):
        test = np.flatnonzero(assignment == f)
        train = np.flatnonzero(assignment != f)
        pairs.append((SampleView(dataset, train), SampleView(dataset, test)))
    return pairs

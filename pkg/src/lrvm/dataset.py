"""Dataset ingestion, z-score normalization, stratified folds and synthetic data."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with integer class labels.

    Parameters
    ----------
    features : ndarray of shape (N, L)
    labels : ndarray of shape (N,)
        Class ids in ``0..class_count-1``.
    class_count : int
    name : str
    class_names : tuple of str, optional
        Original label values, indexed by class id.
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = "dataset"
    class_names: tuple = field(default=())

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        y = np.array(self.labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DatasetError(f"features must be a non-empty 2-D matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DatasetError("labels must have one entry per feature row")
        C = int(self.class_count)
        if C < 1 or y.min() < 0 or y.max() >= C:
            raise DatasetError("labels must lie in 0..class_count-1")
        if len(np.unique(y)) != C:
            raise DatasetError("every class id must occur at least once")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "class_count", C)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        """Rows ``idx`` as a new dataset, keeping the class numbering.

        The class-coverage invariant is not re-checked for subsets, so a
        training fold may lack a rare class.
        """
        sub = object.__new__(Dataset)
        X = self.features[idx]
        y = self.labels[idx]
        X.setflags(write=False)
        y.setflags(write=False)
        for k, v in (("features", X), ("labels", y), ("class_count", self.class_count),
                     ("name", self.name), ("class_names", self.class_names)):
            object.__setattr__(sub, k, v)
        return sub

    def with_features(self, X) -> "Dataset":
        """Same labels, replaced feature matrix (e.g. after normalization)."""
        X = np.array(X, dtype=float)
        if X.shape[0] != self.n_samples:
            raise DatasetError("row count mismatch")
        X.setflags(write=False)
        out = object.__new__(Dataset)
        for k, v in (("features", X), ("labels", self.labels), ("class_count", self.class_count),
                     ("name", self.name), ("class_names", self.class_names)):
            object.__setattr__(out, k, v)
        return out


@dataclass(frozen=True)
class NormStats:
    mu: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True)
class FoldPlan:
    assignments: np.ndarray
    fold_count: int
    seed: int

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays (train, test) for one held-out fold."""
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, label_column="last", name: str | None = None) -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    A header row is detected when the first row holds any non-numeric
    feature cell. Label cells may be integers or arbitrary strings; they are
    mapped to contiguous class ids in order of first appearance.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DatasetError(f"{path}: empty file")

    width = len(rows[0])
    if width < 2:
        raise DatasetError(f"{path}: need at least one feature and one label column")
    if label_column == "last":
        lab = width - 1
    else:
        lab = int(label_column)
        if lab < 0:
            lab += width
        if not 0 <= lab < width:
            raise DatasetError(f"{path}: label column {label_column} out of range")

    first_features = [c for j, c in enumerate(rows[0]) if j != lab]
    if not all(_is_number(c.strip()) for c in first_features):
        rows = rows[1:]
        if not rows:
            raise DatasetError(f"{path}: header only, no data rows")

    features, raw_labels = [], []
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise DatasetError(f"{path}: ragged row {lineno} ({len(row)} columns, expected {width})")
        try:
            features.append([float(c) for j, c in enumerate(row) if j != lab])
        except ValueError as exc:
            raise DatasetError(f"{path}: non-numeric feature in row {lineno}: {exc}") from None
        raw_labels.append(row[lab].strip())

    mapping: dict[str, int] = {}
    for lbl in raw_labels:
        mapping.setdefault(lbl, len(mapping))
    labels = [mapping[lbl] for lbl in raw_labels]
    return Dataset(
        features=np.asarray(features),
        labels=np.asarray(labels),
        class_count=len(mapping),
        name=name or path.stem,
        class_names=tuple(mapping),
    )


def zscore_fit(train: Dataset | np.ndarray) -> NormStats:
    """Per-feature mean and population standard deviation of the training rows."""
    X = train.features if isinstance(train, Dataset) else np.asarray(train, dtype=float)
    return NormStats(mu=X.mean(axis=0), sigma=X.std(axis=0))


def zscore_apply(stats: NormStats, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != stats.mu.shape[0]:
        raise DatasetError(f"expected {stats.mu.shape[0]} columns, got {X.shape[1]}")
    # constant features carry no information and map to 0
    safe = np.where(stats.sigma > 0, stats.sigma, 1.0)
    return np.where(stats.sigma > 0, (X - stats.mu) / safe, 0.0)


def stratified_kfold(data: Dataset, folds: int, seed: int) -> FoldPlan:
    """Seeded per-class shuffle followed by round-robin fold assignment.

    The round-robin offset carries over from one class to the next so that
    fold sizes also stay balanced when classes are smaller than ``folds``.
    """
    N = data.n_samples
    if folds < 2:
        raise DatasetError("need at least 2 folds")
    if folds > N:
        raise DatasetError(f"{folds} folds requested for {N} instances")
    rng = np.random.default_rng(seed)
    assignments = np.empty(N, dtype=np.int64)
    offset = 0
    for c in range(data.class_count):
        members = np.flatnonzero(data.labels == c)
        members = members[rng.permutation(len(members))]
        assignments[members] = (offset + np.arange(len(members))) % folds
        offset = (offset + len(members)) % folds
    assignments.setflags(write=False)
    return FoldPlan(assignments=assignments, fold_count=folds, seed=seed)


RIPLEY_CENTERS = (
    ((-0.7, 0.3), (0.3, 0.3)),
    ((-0.3, 0.7), (0.4, 0.7)),
)
RIPLEY_STD = 0.25


def gen_ripley(n_per_class: int, seed: int) -> Dataset:
    """Two-class, two-cluster-per-class Gaussian mixture in the plane."""
    if n_per_class < 1:
        raise DatasetError("n_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    X, y = [], []
    for c, centers in enumerate(RIPLEY_CENTERS):
        comp = rng.integers(0, 2, size=n_per_class)
        pts = np.asarray(centers)[comp] + RIPLEY_STD * rng.standard_normal((n_per_class, 2))
        X.append(pts)
        y.append(np.full(n_per_class, c))
    return Dataset(np.vstack(X), np.concatenate(y), 2, name="ripley")

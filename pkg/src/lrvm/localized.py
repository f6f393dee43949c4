"""Localized RVM: one small RVM per query, trained on its k nearest neighbours."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .kernel import GramTable, build_gram, cross_kernel, submatrix
from .rvm import DEFAULT_TRAINER, DesignMatrix, RvmError, TrainerConfig, predict_prob, train_rvm


@dataclass(frozen=True)
class LrvmConfig:
    k: int
    gamma: float
    trainer: TrainerConfig = DEFAULT_TRAINER

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class LocalPrediction:
    predicted_class: int
    probabilities: np.ndarray
    lrv_count: int
    iterations: int
    shortcut: bool
    neighbors: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    lrv_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    failed_classes: tuple = ()
    error: str | None = None


def neighbor_order(x, train_features) -> np.ndarray:
    """All training indices sorted by (squared Euclidean distance, index)."""
    x = np.asarray(x, dtype=float)
    X = np.asarray(train_features, dtype=float)
    if X.ndim != 2 or X.shape[1] != x.shape[0]:
        raise ValueError(f"query has {x.shape[0]} features, training rows have {X.shape[-1]}")
    diff = X - x
    d = np.sum(diff * diff, axis=1)
    return np.lexsort((np.arange(X.shape[0]), d))


def find_neighbors(x, train_features, k: int) -> np.ndarray:
    N = np.asarray(train_features).shape[0]
    if not 1 <= k <= N:
        raise ValueError(f"k={k} outside 1..{N}")
    return neighbor_order(x, train_features)[:k]


def local_design(table: GramTable, neighbor_idx) -> DesignMatrix:
    """Bias column followed by the neighbours' kernel block, taken from the table."""
    return DesignMatrix.from_kernel(submatrix(table, neighbor_idx))


def _score_neighborhood(x, nbrs, data: Dataset, K_local, config: LrvmConfig) -> LocalPrediction:
    labels = data.labels[nbrs]
    C = data.class_count
    present = np.unique(labels)
    if present.size == 1:
        probs = np.zeros(C)
        probs[present[0]] = 1.0
        return LocalPrediction(int(present[0]), probs, 0, 0, True, nbrs)

    design = DesignMatrix.from_kernel(K_local)
    X_nb = data.features[nbrs]
    scores = np.zeros(C)
    models = {}
    failed = []
    if present.size == 2:
        # one fit serves both classes: the problem is symmetric under t -> 1 - t
        pos = int(present[1])
        targets = [(pos, labels == pos)]
    else:
        targets = [(int(c), labels == c) for c in present]
    for c, t in targets:
        try:
            model, report = train_rvm(design, t.astype(float), config.trainer, config.gamma)
            kappa = cross_kernel(x, X_nb[model.basis_rows], config.gamma)
            scores[c] = predict_prob(model, kappa)
            models[c] = (model, report)
        except (RvmError, FloatingPointError, ValueError) as exc:
            failed.append((c, str(exc)))
    if present.size == 2 and models:
        scores[int(present[0])] = 1.0 - scores[int(present[1])]
        models[int(present[0])] = models[int(present[1])]

    total = scores.sum()
    if total > 0:
        probs = scores / total
    else:
        probs = np.zeros(C)
        probs[present] = 1.0 / present.size
    # argmax returns the first maximum, i.e. the smaller class id on ties
    winner = int(np.argmax(probs))
    if winner in models:
        model, report = models[winner]
        lrv_idx = nbrs[model.basis_rows]
        return LocalPrediction(winner, probs, model.rv_count, report.outer_iterations, False,
                               nbrs, lrv_idx, tuple(c for c, _ in failed))
    return LocalPrediction(winner, probs, 0, 0, False, nbrs,
                           failed_classes=tuple(c for c, _ in failed))


def classify_local(x, data: Dataset, table: GramTable | None, config: LrvmConfig) -> LocalPrediction:
    """Predict the class of one (normalized) query.

    ``table`` is the Gram table of ``data.features`` at ``config.gamma``. If
    it is None the neighbours' kernel block is recomputed directly.
    """
    x = np.asarray(x, dtype=float)
    nbrs = find_neighbors(x, data.features, config.k)
    return _classify_neighbors(x, nbrs, data, table, config)


def _classify_neighbors(x, nbrs, data, table, config):
    if table is None:
        K = build_gram(data.features[nbrs], config.gamma).values
    else:
        if table.gamma != config.gamma or table.source_count != data.n_samples:
            raise ValueError("Gram table does not match the training data or gamma")
        K = submatrix(table, nbrs)
    return _score_neighborhood(x, nbrs, data, K, config)


def classify_batch(X_test, data: Dataset, table: GramTable | None, config: LrvmConfig) -> list[LocalPrediction]:
    """Classify each row independently; a failing row yields an error record."""
    out = []
    for x in np.asarray(X_test, dtype=float).reshape(-1, data.n_features):
        try:
            out.append(classify_local(x, data, table, config))
        except (ValueError, IndexError, RvmError) as exc:
            out.append(LocalPrediction(-1, np.zeros(data.class_count), 0, 0, False, error=str(exc)))
    return out

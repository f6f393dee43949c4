"""Majority-vote k-nearest-neighbour classifier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .localized import find_neighbors


@dataclass(frozen=True)
class KnnConfig:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def even(self) -> bool:
        """Even k admits vote ties; allowed, but worth flagging in reports."""
        return self.k % 2 == 0


def vote(labels, distances, class_count: int) -> int:
    """Modal label; ties go to the smaller summed distance, then the smaller class id."""
    labels = np.asarray(labels)
    distances = np.asarray(distances, dtype=float)
    counts = np.bincount(labels, minlength=class_count)
    tied = np.flatnonzero(counts == counts.max())
    if tied.size == 1:
        return int(tied[0])
    sums = np.array([distances[labels == c].sum() for c in tied])
    return int(tied[np.flatnonzero(sums == sums.min())[0]])


def knn_classify(x, data: Dataset, k: int) -> int:
    x = np.asarray(x, dtype=float)
    nbrs = find_neighbors(x, data.features, k)
    return knn_vote_neighbors(x, nbrs, data)


def knn_vote_neighbors(x, nbrs, data: Dataset) -> int:
    dist = np.sqrt(np.sum((data.features[nbrs] - x) ** 2, axis=1))
    return vote(data.labels[nbrs], dist, data.class_count)

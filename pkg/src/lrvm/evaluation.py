"""Cross-validation, grid search and rank statistics for comparing classifiers."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .baselines import knn_vote_neighbors
from .dataset import Dataset, stratified_kfold, zscore_apply, zscore_fit
from .kernel import build_gram, cross_kernel
from .localized import LrvmConfig, _classify_neighbors, neighbor_order
from .rvm import DEFAULT_TRAINER, DesignMatrix, TrainerConfig, predict_prob, train_rvm

GAMMA_GRID = tuple(2.0 ** e for e in range(-3, 7))
LRVM_K_GRID = tuple(range(1, 72))
KNN_K_GRID = tuple(range(1, 72, 2))

# Two-tailed Nemenyi critical values q_0.05 by number of classifiers.
NEMENYI_Q05 = {2: 1.960, 3: 2.343, 4: 2.569, 5: 2.728, 6: 2.850,
               7: 2.949, 8: 3.031, 9: 3.102, 10: 3.164}


# ---------------------------------------------------------------------------
# classifier families
# ---------------------------------------------------------------------------

@dataclass
class FoldOutput:
    predictions: np.ndarray
    lrv_counts: np.ndarray | None = None
    iterations: np.ndarray | None = None


class ClassifierFamily:
    """A classifier with a hyperparameter grid.

    ``evaluate`` receives normalized training data and test rows and returns
    one :class:`FoldOutput` per requested parameter point, which lets a family
    share work (Gram tables, neighbour orderings) across the grid.
    """

    name = "classifier"

    def grid_points(self, grid: "GridSpec") -> list[dict]:
        return [{}]

    def evaluate(self, train: Dataset, X_test, points: list[dict]) -> list[FoldOutput]:
        raise NotImplementedError


class LrvmFamily(ClassifierFamily):
    name = "lrvm"

    def __init__(self, trainer: TrainerConfig = DEFAULT_TRAINER):
        self.trainer = trainer

    def grid_points(self, grid):
        return [{"k": k, "gamma": g} for k in grid.k_values for g in grid.gamma_values]

    def evaluate(self, train, X_test, points):
        orders = [neighbor_order(x, train.features) for x in X_test]
        outputs = [None] * len(points)
        for gamma in sorted({p["gamma"] for p in points}):
            table = build_gram(train.features, gamma)
            for i, p in enumerate(points):
                if p["gamma"] != gamma:
                    continue
                cfg = LrvmConfig(k=min(p["k"], train.n_samples), gamma=gamma, trainer=self.trainer)
                preds = [_classify_neighbors(x, order[:cfg.k], train, table, cfg)
                         for x, order in zip(X_test, orders)]
                outputs[i] = FoldOutput(
                    np.array([q.predicted_class for q in preds]),
                    np.array([q.lrv_count for q in preds]),
                    np.array([q.iterations for q in preds]),
                )
        return outputs


class KnnFamily(ClassifierFamily):
    name = "knn"

    def grid_points(self, grid):
        return [{"k": k} for k in grid.knn_k_values]

    def evaluate(self, train, X_test, points):
        orders = [neighbor_order(x, train.features) for x in X_test]
        return [
            FoldOutput(np.array([knn_vote_neighbors(x, order[:min(p["k"], train.n_samples)], train)
                                 for x, order in zip(X_test, orders)]))
            for p in points
        ]


@dataclass(frozen=True)
class GlobalRvm:
    """One-vs-rest global RVMs (a single model for two classes)."""

    models: tuple
    classes: tuple
    class_count: int
    iterations: int

    def scores(self, X_train, x) -> np.ndarray:
        s = np.zeros(self.class_count)
        for c, m in zip(self.classes, self.models):
            s[c] = predict_prob(m, cross_kernel(x, X_train[m.basis_rows], m.gamma))
        if len(self.classes) == 1 and self.class_count == 2:
            s[1 - self.classes[0]] = 1.0 - s[self.classes[0]]
        return s

    @property
    def rv_count(self) -> int:
        return len(set().union(*(set(m.basis_rows.tolist()) for m in self.models)))


def fit_global_rvm(train: Dataset, gamma: float, trainer: TrainerConfig = DEFAULT_TRAINER) -> GlobalRvm:
    design = DesignMatrix.from_kernel(build_gram(train.features, gamma).values)
    present = np.unique(train.labels)
    targets = [int(present[-1])] if present.size == 2 else [int(c) for c in present]
    models, iters = [], 0
    for c in targets:
        m, rep = train_rvm(design, (train.labels == c).astype(float), trainer, gamma)
        models.append(m)
        iters = max(iters, rep.outer_iterations)
    return GlobalRvm(tuple(models), tuple(targets), train.class_count, iters)


class GlobalRvmFamily(ClassifierFamily):
    name = "rvm-global"

    def __init__(self, trainer: TrainerConfig = DEFAULT_TRAINER):
        self.trainer = trainer

    def grid_points(self, grid):
        return [{"gamma": g} for g in grid.gamma_values]

    def evaluate(self, train, X_test, points):
        out = []
        for p in points:
            model = fit_global_rvm(train, p["gamma"], self.trainer)
            preds = np.array([int(np.argmax(model.scores(train.features, x))) for x in X_test])
            n = len(X_test)
            out.append(FoldOutput(preds, np.full(n, model.rv_count), np.full(n, model.iterations)))
        return out


FAMILIES = {"lrvm": LrvmFamily, "knn": KnnFamily, "rvm-global": GlobalRvmFamily}


# ---------------------------------------------------------------------------
# cross-validation and grid search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    k_values: tuple = LRVM_K_GRID
    gamma_values: tuple = GAMMA_GRID
    knn_k_values: tuple = KNN_K_GRID

    def __post_init__(self):
        if not (self.k_values and self.gamma_values and self.knn_k_values):
            raise ValueError("grid lists must be non-empty")


@dataclass
class CvResult:
    """Accuracies of shape (runs, folds) for one parameter point."""

    fold_accuracies: np.ndarray
    params: dict
    wall_clock: float = 0.0
    mean_lrv: float = float("nan")
    mean_iterations: float = float("nan")
    grid_means: dict = field(default_factory=dict)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.fold_accuracies))


def run_seed(seed: int, run: int) -> int:
    """Fold-plan seed for one run, independent of execution order."""
    return int(np.random.SeedSequence([seed, run]).generate_state(1, np.uint64)[0])


def _cv_points(family, data, points, runs, folds, seed):
    acc = np.zeros((len(points), runs, folds))
    lrv = [[] for _ in points]
    its = [[] for _ in points]
    for r in range(runs):
        plan = stratified_kfold(data, folds, run_seed(seed, r))
        for f in range(folds):
            tr, te = plan.train_test(f)
            stats = zscore_fit(data.features[tr])
            train = data.subset(tr).with_features(zscore_apply(stats, data.features[tr]))
            X_test = zscore_apply(stats, data.features[te])
            y_test = data.labels[te]
            for i, out in enumerate(family.evaluate(train, X_test, points)):
                acc[i, r, f] = np.mean(out.predictions == y_test)
                if out.lrv_counts is not None:
                    lrv[i].append(out.lrv_counts)
                    its[i].append(out.iterations)
    return acc, lrv, its


def run_cv(family: ClassifierFamily, params: dict, data: Dataset, runs: int = 10,
           folds: int = 10, seed: int = 0) -> CvResult:
    """Repeated stratified k-fold accuracy of one parameter point.

    Normalization statistics are fit on the training folds only.
    """
    start = time.perf_counter()
    acc, lrv, its = _cv_points(family, data, [params], runs, folds, seed)
    res = CvResult(acc[0], dict(params), time.perf_counter() - start)
    if lrv[0]:
        res.mean_lrv = float(np.mean(np.concatenate(lrv[0])))
        res.mean_iterations = float(np.mean(np.concatenate(its[0])))
    return res


def _tie_key(p: dict):
    return (p.get("k", 0), p.get("gamma", 0.0))


def grid_search(family: ClassifierFamily, data: Dataset, grid: GridSpec, seed: int = 0,
                folds: int = 10) -> tuple[dict, CvResult]:
    """Single-run CV over every grid point; best mean accuracy wins.

    Ties go to the smaller k, then the smaller gamma. Points whose k exceeds
    the smallest training fold are skipped.
    """
    start = time.perf_counter()
    min_train = data.n_samples - int(np.ceil(data.n_samples / folds))
    points = [p for p in family.grid_points(grid) if p.get("k", 1) <= min_train]
    if not points:
        raise ValueError("no usable grid point")
    points.sort(key=_tie_key)
    acc, lrv, its = _cv_points(family, data, points, 1, folds, seed)
    means = acc.reshape(len(points), -1).mean(axis=1)
    best = int(np.flatnonzero(means == means.max())[0])
    res = CvResult(acc[best], dict(points[best]), time.perf_counter() - start)
    if lrv[best]:
        res.mean_lrv = float(np.mean(np.concatenate(lrv[best])))
        res.mean_iterations = float(np.mean(np.concatenate(its[best])))
    res.grid_means = {tuple(sorted(p.items())): float(m) for p, m in zip(points, means)}
    return dict(points[best]), res


# ---------------------------------------------------------------------------
# rank statistics
# ---------------------------------------------------------------------------

class StatisticUndefined(ValueError):
    """The Fisher-form statistic has a zero or negative denominator."""


def dataset_ranks(accuracy) -> np.ndarray:
    """Per-dataset ranks, 1 = most accurate, ties share the average rank."""
    A = np.asarray(accuracy, dtype=float)
    if A.ndim != 2 or A.shape[1] < 2 or A.shape[0] < 1:
        raise ValueError("accuracy matrix must be datasets x classifiers with >= 2 classifiers")
    if not np.all(np.isfinite(A)):
        raise ValueError("accuracy matrix has non-finite cells")
    return np.vstack([rankdata(-row, method="average") for row in A])


def rank_table(accuracy) -> np.ndarray:
    return dataset_ranks(accuracy).mean(axis=0)


def friedman_chi2(avg_ranks, n_datasets: int) -> float:
    R = np.asarray(avg_ranks, dtype=float)
    G = R.size
    if abs(R.sum() - G * (G + 1) / 2) > 1e-6:
        raise ValueError(f"average ranks sum to {R.sum()}, expected {G * (G + 1) / 2}")
    L = n_datasets
    return 12.0 * L / (G * (G + 1)) * (np.sum(R ** 2) - G * (G + 1) ** 2 / 4.0)


def fisher_f(chi2: float, n_datasets: int, n_classifiers: int) -> float:
    L, G = n_datasets, n_classifiers
    denom = L * (G - 1) - chi2
    if denom <= 0:
        raise StatisticUndefined(f"statistic undefined: denominator L(G-1) - chi2 = {denom}")
    return (L - 1) * chi2 / denom


def critical_difference(n_classifiers: int, n_datasets: int, cv_alpha: float) -> float:
    if cv_alpha < 0:
        raise ValueError("cv_alpha must be non-negative")
    G, L = n_classifiers, n_datasets
    return cv_alpha * np.sqrt(G * (G + 1) / (6.0 * L))


def nemenyi_groups(avg_ranks, cd: float) -> list[tuple[int, ...]]:
    """Maximal sets of rank-adjacent classifiers whose rank spread is within ``cd``.

    Groups are returned as tuples of classifier indices ordered by rank;
    overlapping groups are allowed, groups contained in another are dropped.
    """
    R = np.asarray(avg_ranks, dtype=float)
    order = np.argsort(R, kind="stable")
    sr = R[order]
    groups, last_end = [], -1
    for i in range(len(sr)):
        j = i
        while j + 1 < len(sr) and sr[j + 1] - sr[i] <= cd:
            j += 1
        if j > last_end:
            groups.append(tuple(int(c) for c in order[i:j + 1]))
            last_end = j
    return groups


@dataclass
class FriedmanReport:
    classifiers: list
    avg_ranks: np.ndarray
    n_datasets: int
    chi2_f: float
    f_f: float | None
    cd: float
    cv_alpha: float
    groups: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"datasets: {self.n_datasets}", f"classifiers: {len(self.classifiers)}", "average ranks:"]
        for i in np.argsort(self.avg_ranks, kind="stable"):
            lines.append(f"  {self.classifiers[i]}: {self.avg_ranks[i]:.4f}")
        lines.append(f"chi2_F: {self.chi2_f:.6f}")
        lines.append("F_F: " + ("undefined" if self.f_f is None else f"{self.f_f:.6f}"))
        lines.append(f"cv_alpha: {self.cv_alpha}")
        lines.append(f"CD: {self.cd:.6f}")
        lines.append("groups:")
        for g in self.groups:
            lines.append("  " + ", ".join(self.classifiers[i] for i in g))
        return "\n".join(lines) + "\n"

    def to_csv_rows(self) -> list[list[str]]:
        rows = [["section", "name", "value"]]
        for name, r in zip(self.classifiers, self.avg_ranks):
            rows.append(["rank", name, repr(float(r))])
        rows.append(["stat", "chi2_f", repr(float(self.chi2_f))])
        rows.append(["stat", "f_f", "undefined" if self.f_f is None else repr(float(self.f_f))])
        rows.append(["stat", "cv_alpha", repr(float(self.cv_alpha))])
        rows.append(["stat", "cd", repr(float(self.cd))])
        rows.append(["stat", "n_datasets", str(self.n_datasets)])
        for gi, g in enumerate(self.groups):
            rows.append(["group", str(gi), ";".join(self.classifiers[i] for i in g)])
        return rows


def friedman_report(accuracy, classifiers, cv_alpha: float) -> FriedmanReport:
    A = np.asarray(accuracy, dtype=float)
    R = rank_table(A)
    L, G = A.shape
    chi2 = friedman_chi2(R, L)
    try:
        ff = fisher_f(chi2, L, G)
    except StatisticUndefined:
        ff = None
    cd = critical_difference(G, L, cv_alpha)
    return FriedmanReport(list(classifiers), R, L, chi2, ff, cd, cv_alpha, nemenyi_groups(R, cd))


# ---------------------------------------------------------------------------
# table I/O
# ---------------------------------------------------------------------------

def read_accuracy_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    """Header row of classifier names, first column dataset names."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row and at least one dataset row")
    header = rows[0]
    if len(header) < 3:
        raise ValueError(f"{path}: need at least two classifier columns")
    try:
        [float(c) for c in header[1:]]
    except ValueError:
        pass
    else:
        raise ValueError(f"{path}: missing header row of classifier names")
    names, values = [], []
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise ValueError(f"{path}: row {i} has {len(r)} cells, expected {len(header)}")
        names.append(r[0])
        try:
            values.append([float(c) for c in r[1:]])
        except ValueError as exc:
            raise ValueError(f"{path}: row {i}: {exc}") from None
    return names, [h.strip() for h in header[1:]], np.asarray(values)


def format_accuracy_csv(datasets, classifiers, matrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", *classifiers])
    for name, row in zip(datasets, np.asarray(matrix, dtype=float)):
        w.writerow([name, *(repr(float(v)) for v in row)])
    return buf.getvalue()

import numpy as np
import pytest

from lrvm.baselines import knn_classify
from lrvm.dataset import Dataset, gen_ripley, zscore_apply, zscore_fit
from lrvm.kernel import build_gram
from lrvm.localized import (LrvmConfig, classify_batch, classify_local, find_neighbors, local_design)


def random_dataset(rng, n=None, l=None, classes=None):
    n = n or int(rng.integers(6, 40))
    l = l or int(rng.integers(1, 4))
    classes = classes or int(rng.integers(2, min(3, n) + 1))
    X = rng.normal(size=(n, l))
    y = np.arange(n) % classes
    rng.shuffle(y)
    return Dataset(X, y, classes)


@pytest.fixture(scope="module")
def ripley():
    d = gen_ripley(125, seed=0)
    stats = zscore_fit(d)
    return d.with_features(zscore_apply(stats, d.features)), stats


class TestFindNeighbors:
    def test_nearest(self):
        X = np.array([[0.0], [1.0], [2.0]])
        assert find_neighbors([0.1], X, 1).tolist() == [0]

    def test_tie_break_by_index(self):
        X = np.zeros((8, 1))
        X[3] = [1.0]
        X[7] = [-1.0]
        X[[0, 1, 2, 4, 5, 6]] = 10.0
        assert find_neighbors([0.0], X, 1).tolist() == [3]

    def test_k_equals_n(self):
        X = np.array([[5.0], [0.0], [2.0], [-1.0]])
        assert find_neighbors([0.0], X, 4).tolist() == [1, 3, 2, 0]

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            find_neighbors([0.0], np.zeros((2, 1)), 3)


class TestLocalDesign:
    def test_k1(self):
        table = build_gram(np.random.default_rng(0).normal(size=(5, 2)), 1.0)
        assert local_design(table, [3]).values.tolist() == [[1.0, 1.0]]

    def test_matches_recomputation(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(12, 3))
        table = build_gram(X, 0.5)
        idx = [7, 2, 9]
        D = local_design(table, idx).values
        assert D.shape == (3, 4)
        assert np.all(D[:, 0] == 1.0)
        assert np.array_equal(D[:, 1:], build_gram(X[idx], 0.5).values)
        assert np.array_equal(D[:, 1:], D[:, 1:].T)


class TestClassifyLocal:
    def test_homogeneous_shortcut(self):
        X = np.array([[0.0], [0.1], [0.2], [0.3], [0.4], [5.0], [6.0]])
        d = Dataset(X, [2, 2, 2, 2, 2, 0, 1], 3)
        p = classify_local([0.2], d, build_gram(X, 1.0), LrvmConfig(5, 1.0))
        assert p.shortcut and p.predicted_class == 2
        assert p.probabilities.tolist() == [0.0, 0.0, 1.0]
        assert (p.lrv_count, p.iterations) == (0, 0)

    def test_k1_equals_1nn(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            d = random_dataset(rng)
            table = build_gram(d.features, 1.0)
            x = rng.normal(size=d.n_features)
            assert classify_local(x, d, table, LrvmConfig(1, 1.0)).predicted_class == knn_classify(x, d, 1)

    def test_ripley_query_near_class0(self, ripley):
        d, stats = ripley
        x = zscore_apply(stats, [[-0.7, 0.3]])[0]
        nbrs = find_neighbors(x, d.features, 20)
        votes = np.bincount(d.labels[nbrs], minlength=2)
        assert votes[0] > votes[1]
        p = classify_local(x, d, build_gram(d.features, 0.5), LrvmConfig(20, 0.5))
        assert p.predicted_class == 0 and p.probabilities[0] > 0.5

    def test_prediction_invariants(self, ripley):
        d, stats = ripley
        table = build_gram(d.features, 0.5)
        rng = np.random.default_rng(3)
        for x in rng.normal(size=(25, 2)):
            p = classify_local(x, d, table, LrvmConfig(15, 0.5))
            assert p.lrv_count <= 15
            assert np.all((p.probabilities >= 0) & (p.probabilities <= 1))
            assert abs(p.probabilities.sum() - 1) < 1e-9
            assert p.predicted_class == int(np.argmax(p.probabilities))
            assert set(p.lrv_indices.tolist()) <= set(p.neighbors.tolist())

    def test_multiclass_neighborhood(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(30, 2))
        y = np.repeat([0, 1, 2], 10)
        X[y == 1] += [2.0, 0.0]
        X[y == 2] += [1.0, 2.0]
        d = Dataset(X, y, 3)
        p = classify_local([1.0, 0.7], d, build_gram(X, 0.5), LrvmConfig(30, 0.5))
        assert not p.shortcut
        assert np.count_nonzero(p.probabilities) == 3
        assert abs(p.probabilities.sum() - 1) < 1e-9

    def test_absent_class_gets_zero(self):
        X = np.array([[0.0], [0.2], [0.4], [9.0]])
        d = Dataset(X, [0, 1, 0, 2], 3)
        p = classify_local([0.1], d, build_gram(X, 1.0), LrvmConfig(3, 1.0))
        assert p.probabilities[2] == 0.0

    def test_lookup_equivalence(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            d = random_dataset(rng, n=int(rng.integers(2, 50)))
            gamma = float(2.0 ** rng.integers(-3, 7))
            k = int(rng.integers(1, d.n_samples + 1))
            x = rng.normal(size=d.n_features)
            cfg = LrvmConfig(k, gamma)
            a = classify_local(x, d, build_gram(d.features, gamma), cfg)
            b = classify_local(x, d, None, cfg)
            assert a.predicted_class == b.predicted_class
            assert np.array_equal(a.probabilities, b.probabilities)

    def test_locality(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            d = random_dataset(rng, n=int(rng.integers(8, 30)), l=2)
            k = int(rng.integers(1, d.n_samples - 1))
            cfg = LrvmConfig(k, 1.0)
            x = rng.normal(size=2)
            before = classify_local(x, d, build_gram(d.features, 1.0), cfg)
            outside = np.setdiff1d(np.arange(d.n_samples), before.neighbors)
            j = int(rng.choice(outside))
            X2 = d.features.copy()
            # push the row further away so it stays outside the neighbourhood
            X2[j] = x + (X2[j] - x) * rng.uniform(1.0, 3.0)
            d2 = d.with_features(X2)
            after = classify_local(x, d2, build_gram(X2, 1.0), cfg)
            assert after.predicted_class == before.predicted_class
            assert np.array_equal(after.probabilities, before.probabilities)

    def test_deterministic(self, ripley):
        d, _ = ripley
        table = build_gram(d.features, 0.5)
        a = classify_local([0.1, 0.2], d, table, LrvmConfig(12, 0.5))
        b = classify_local([0.1, 0.2], d, table, LrvmConfig(12, 0.5))
        assert a.predicted_class == b.predicted_class and np.array_equal(a.probabilities, b.probabilities)

    def test_mismatched_table(self, ripley):
        d, _ = ripley
        with pytest.raises(ValueError):
            classify_local([0.0, 0.0], d, build_gram(d.features, 1.0), LrvmConfig(5, 0.5))


class TestClassifyBatch:
    def test_empty(self, ripley):
        d, _ = ripley
        assert classify_batch(np.empty((0, 2)), d, build_gram(d.features, 0.5), LrvmConfig(5, 0.5)) == []

    def test_equals_sequential_map(self, ripley):
        d, _ = ripley
        table = build_gram(d.features, 0.5)
        cfg = LrvmConfig(10, 0.5)
        X = np.random.default_rng(7).normal(size=(15, 2))
        batch = classify_batch(X, d, table, cfg)
        for x, p in zip(X, batch):
            q = classify_local(x, d, table, cfg)
            assert p.predicted_class == q.predicted_class
            assert np.array_equal(p.probabilities, q.probabilities)
            assert (p.lrv_count, p.iterations) == (q.lrv_count, q.iterations)

    def test_errors_collected(self, ripley):
        d, _ = ripley
        out = classify_batch(np.zeros((2, 2)), d, build_gram(d.features, 0.5), LrvmConfig(500, 0.5))
        assert len(out) == 2 and all(p.error and p.predicted_class == -1 for p in out)

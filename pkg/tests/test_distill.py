import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qksvm.dataio import FeatureMatrix
from qksvm.distill import DistillConfig, distill, kmeans, split
from qksvm.errors import EmptyInput, KExceedsPopulation


class TestKmeans:
    def test_k_equals_n(self):
        pts = np.array([[0.0], [5.0], [9.0]])
        centers, assign, inertia = kmeans(pts, 3, DistillConfig(seed=1))
        assert inertia == 0.0
        assert sorted(centers.ravel().tolist()) == [0.0, 5.0, 9.0]
        # every point sits exactly on its own centroid
        np.testing.assert_allclose(centers[assign].ravel(), pts.ravel())

    def test_two_separated_clusters(self):
        pts = np.array([[0.0], [0.1], [10.0], [10.1]])
        centers, assign, _ = kmeans(pts, 2, DistillConfig(seed=0))
        got = sorted(centers.ravel().tolist())
        np.testing.assert_allclose(got, [0.05, 10.05], atol=1e-12)
        assert assign[0] == assign[1] and assign[2] == assign[3]
        assert assign[0] != assign[2]

    def test_k1_is_mean(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(40, 5))
        centers, _, _ = kmeans(pts, 1, DistillConfig(seed=0))
        np.testing.assert_allclose(centers[0], pts.mean(axis=0), atol=1e-12)

    def test_errors(self):
        with pytest.raises(EmptyInput):
            kmeans(np.empty((0, 2)), 1)
        with pytest.raises(KExceedsPopulation):
            kmeans(np.zeros((3, 2)), 4)

    @given(
        n=st.integers(5, 40),
        k=st.integers(1, 5),
        d=st.integers(1, 4),
        seed=st.integers(0, 10_000),
    )
    @settings(max_examples=40, deadline=None)
    def test_inertia_monotone(self, n, k, d, seed):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(n, d))
        history: list[float] = []
        kmeans(pts, min(k, n), DistillConfig(seed=seed), history=history)
        for prev, cur in zip(history, history[1:]):
            assert cur <= prev + 1e-9


def _labeled_blobs(per_class=20, classes=3, d=2, seed=0, spread=0.3):
    rng = np.random.default_rng(seed)
    feats, labels = [], []
    for c in range(classes):
        feats.append(rng.normal(loc=4.0 * c, scale=spread, size=(per_class, d)))
        labels.extend([c] * per_class)
    return FeatureMatrix(
        data=np.concatenate(feats).astype(np.float64), labels=np.array(labels)
    )


class TestDistill:
    def test_counts_and_membership(self):
        data = _labeled_blobs(per_class=30, classes=4)
        ds = distill(data, DistillConfig(k_per_class=5, seed=0))
        assert ds.n_samples == 20
        for cls, idx in ds.indices.items():
            assert len(idx) == 5
            assert len(np.unique(idx)) == 5
            assert np.all(data.labels[idx] == cls)  # prototypes stay in-class
        # prototypes are original samples, bit for bit
        for row, orig in zip(ds.features.data, np.concatenate(list(ds.indices.values()))):
            np.testing.assert_array_equal(row, data.data[orig])

    def test_class_with_exactly_k(self):
        data = _labeled_blobs(per_class=5, classes=2)
        ds = distill(data, DistillConfig(k_per_class=5, seed=1))
        np.testing.assert_array_equal(np.sort(ds.indices[0]), np.arange(5))
        np.testing.assert_array_equal(np.sort(ds.indices[1]), np.arange(5, 10))

    def test_prototypes_match_bruteforce(self):
        # well-separated 1-D clusters: selection must equal an exhaustive scan
        rng = np.random.default_rng(5)
        vals = np.concatenate([rng.normal(0, 0.1, 10), rng.normal(50, 0.1, 10)])
        data = FeatureMatrix(data=vals.reshape(-1, 1), labels=np.zeros(20, dtype=int))
        cfg = DistillConfig(k_per_class=2, seed=0)
        ds = distill(data, cfg)

        class_cfg = DistillConfig(k_per_class=2, seed=cfg.seed + 0)
        centers, _, _ = kmeans(data.data, 2, class_cfg)
        expected = set()
        for c in centers:
            expected.add(int(np.argmin(np.sum((data.data - c) ** 2, axis=1))))
        assert set(ds.indices[0].tolist()) == expected

    def test_duplicate_points_trigger_collision_fallback(self):
        data = FeatureMatrix(
            data=np.array([[5.0], [5.0], [5.0], [9.0]]),
            labels=np.zeros(4, dtype=int),
        )
        ds = distill(data, DistillConfig(k_per_class=3, seed=0))
        idx = ds.indices[0]
        assert len(idx) == 3 and len(np.unique(idx)) == 3

    def test_k_exceeds_population(self):
        data = _labeled_blobs(per_class=3, classes=2)
        with pytest.raises(KExceedsPopulation):
            distill(data, DistillConfig(k_per_class=4))


class TestSplit:
    def _distilled(self, per_class=10, classes=10):
        data = _labeled_blobs(per_class=per_class, classes=classes)
        return distill(data, DistillConfig(k_per_class=per_class, seed=0))

    def test_80_20(self):
        ds = self._distilled(per_class=10, classes=10)
        train, test = split(ds, 0.8, seed=0)
        assert train.rows == 80 and test.rows == 20
        for c in range(10):
            assert int((train.labels == c).sum()) == 8
            assert int((test.labels == c).sum()) == 2

    def test_deterministic(self):
        ds = self._distilled()
        t1 = split(ds, 0.8, seed=42)
        t2 = split(ds, 0.8, seed=42)
        np.testing.assert_array_equal(t1[0].data, t2[0].data)
        np.testing.assert_array_equal(t1[1].labels, t2[1].labels)

    def test_workload_arithmetic(self):
        # distilling to 1600 training samples shrinks the kernel workload
        # from 70000^2 to 1600^2 evaluations
        k_per_class, classes, frac = 200, 10, 0.8
        n_train = classes * round(k_per_class * frac)
        assert n_train == 1600
        assert n_train**2 == 2_560_000
        assert 70_000**2 // n_train**2 == 1914  # ~1900x fewer entries

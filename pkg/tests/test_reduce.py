import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qksvm.dataio import FeatureMatrix
from qksvm.errors import DimError, NotFitted
from qksvm.reduce import (
    AngleScaler,
    PcaModel,
    pca_fit,
    pca_inverse_transform,
    pca_transform,
    scale_angles,
)

from oracles import pca_eigh


class TestPcaFit:
    def test_degenerate_line(self):
        t = np.linspace(-1, 1, 9)
        X = np.stack([t, t], axis=1)  # all points on y = x
        model = pca_fit(X, 2)
        np.testing.assert_allclose(
            model.components[0], [1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-12
        )
        assert model.explained_variance[1] == pytest.approx(0.0, abs=1e-12)
        assert model.rank_deficient

    def test_full_rank_identity_preserves_distances(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(30, 6))
        model = pca_fit(X, 6)
        Y = pca_transform(model, X).data
        dx = np.linalg.norm(X[:, None] - X[None, :], axis=-1)
        dy = np.linalg.norm(Y[:, None] - Y[None, :], axis=-1)
        np.testing.assert_allclose(dx, dy, atol=1e-6)

    def test_matches_eigh_oracle(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(50, 8)) @ np.diag([5, 4, 3, 2.5, 2, 1.5, 1, 0.5])
        model = pca_fit(X, 8)
        mean_o, comps_o, var_o = pca_eigh(X, 8)
        np.testing.assert_allclose(model.mean, mean_o, atol=1e-10)
        np.testing.assert_allclose(model.components, comps_o, atol=1e-8)
        np.testing.assert_allclose(model.explained_variance, var_o, atol=1e-8)

    def test_orthonormal_and_sorted(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(40, 10))
        model = pca_fit(X, 5)
        np.testing.assert_allclose(
            model.components @ model.components.T, np.eye(5), atol=1e-8
        )
        ev = model.explained_variance
        assert np.all(ev[:-1] >= ev[1:] - 1e-12)
        assert np.all(ev >= 0)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(25, 7))
        m1, m2 = pca_fit(X, 4), pca_fit(X, 4)
        assert m1.components.tobytes() == m2.components.tobytes()

    def test_dim_errors(self):
        with pytest.raises(DimError):
            pca_fit(np.zeros((5, 3)), 4)
        with pytest.raises(DimError):
            pca_fit(np.zeros((5, 3)), 0)


class TestPcaTransform:
    def test_mean_row_maps_to_zero(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(20, 5))
        model = pca_fit(X, 3)
        out = pca_transform(model, X.mean(axis=0, keepdims=True)).data
        np.testing.assert_allclose(out, 0.0, atol=1e-10)

    def test_inverse_roundtrip_full_rank(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(20, 5))
        model = pca_fit(X, 5)
        back = pca_inverse_transform(model, pca_transform(model, X))
        np.testing.assert_allclose(back, X, atol=1e-6)

    def test_handbuilt_2d_projection(self):
        X = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 4.0]])
        model = pca_fit(X, 2)
        # closed-form 2x2 eigendecomposition of the sample covariance
        c = X - X.mean(axis=0)
        a, b, d = (
            c[:, 0] @ c[:, 0] / 2,
            c[:, 0] @ c[:, 1] / 2,
            c[:, 1] @ c[:, 1] / 2,
        )
        lam1 = 0.5 * (a + d) + math.sqrt(0.25 * (a - d) ** 2 + b * b)
        v1 = np.array([b, lam1 - a])
        v1 /= np.linalg.norm(v1)
        if v1[np.argmax(np.abs(v1))] < 0:
            v1 = -v1
        np.testing.assert_allclose(model.components[0], v1, atol=1e-10)
        np.testing.assert_allclose(
            pca_transform(model, X).data[:, 0], c @ v1, atol=1e-10
        )

    def test_dim_mismatch(self):
        model = pca_fit(np.random.default_rng(0).normal(size=(10, 4)), 2)
        with pytest.raises(DimError):
            pca_transform(model, np.zeros((3, 5)))

    @given(
        n=st.integers(6, 30),
        d=st.integers(2, 8),
        m=st.integers(1, 8),
        seed=st.integers(0, 10_000),
    )
    @settings(max_examples=30, deadline=None)
    def test_reconstruction_error_equals_discarded_variance(self, n, d, m, seed):
        m = min(m, d, n)
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, d))
        full = pca_fit(X, min(n, d))
        model = pca_fit(X, m)
        Z = pca_transform(model, X)
        back = pca_inverse_transform(model, Z)
        residual = float(((X - back) ** 2).sum()) / max(n - 1, 1)
        discarded = float(full.explained_variance[m:].sum())
        assert residual == pytest.approx(discarded, abs=1e-6)


class TestAngleScaler:
    def _fitted(self, lo=-math.pi, hi=math.pi):
        train = np.array([[0.0], [1.0]])
        return AngleScaler(lo=lo, hi=hi).fit(train)

    def test_midpoint(self):
        s = self._fitted()
        out = scale_angles(s, np.array([[0.5]]))
        assert out.data[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_max_maps_to_hi(self):
        s = self._fitted()
        out = scale_angles(s, np.array([[1.0]]))
        assert out.data[0, 0] == pytest.approx(math.pi)

    def test_clamp_beyond_train_range(self):
        s = self._fitted()
        out = scale_angles(s, np.array([[2.0], [-3.0]]))
        assert out.data[0, 0] == pytest.approx(math.pi)
        assert out.data[1, 0] == pytest.approx(-math.pi)

    def test_constant_feature_maps_to_midpoint(self):
        train = np.array([[3.0, 0.0], [3.0, 1.0]])
        s = AngleScaler(lo=0.0, hi=2.0).fit(train)
        out = scale_angles(s, np.array([[3.0, 0.5], [99.0, 0.5]]))
        np.testing.assert_allclose(out.data[:, 0], 1.0)  # midpoint of [0, 2]

    def test_not_fitted(self):
        with pytest.raises(NotFitted):
            scale_angles(AngleScaler(), np.zeros((1, 1)))

    def test_keeps_labels(self):
        s = self._fitted()
        fm = FeatureMatrix(data=np.array([[0.25]]), labels=np.array([7]))
        out = scale_angles(s, fm)
        np.testing.assert_array_equal(out.labels, [7])

    def test_global_mode_preserves_relative_magnitudes(self):
        train = np.array([[0.0, 0.0], [1.0, 0.5]])  # feature 1 spans half of 0
        s = AngleScaler(lo=0.0, hi=1.0, mode="global").fit(train)
        out = scale_angles(s, train).data
        np.testing.assert_allclose(out, train)  # global range is [0, 1] already
        per = AngleScaler(lo=0.0, hi=1.0).fit(train)
        out_per = scale_angles(per, train).data
        assert out_per[1, 1] == 1.0  # per-feature stretches column 1 to full range

    def test_global_mode_rejects_unknown(self):
        with pytest.raises(ValueError):
            AngleScaler(mode="weird")

    @given(
        n=st.integers(2, 20),
        d=st.integers(1, 5),
        seed=st.integers(0, 10_000),
    )
    @settings(max_examples=40, deadline=None)
    def test_never_outside_range(self, n, d, seed):
        rng = np.random.default_rng(seed)
        train = rng.normal(size=(n, d))
        test = rng.normal(size=(n, d)) * 3.0
        s = AngleScaler(lo=-1.0, hi=2.5).fit(train)
        for X in (train, test):
            out = scale_angles(s, X).data
            assert out.min() >= -1.0 - 1e-12
            assert out.max() <= 2.5 + 1e-12

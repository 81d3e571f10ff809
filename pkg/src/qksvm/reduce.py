"""PCA compression and rotation-angle scaling ahead of circuit encoding.

PCA is computed from the SVD of the centered training matrix with a fixed
sign convention (largest-magnitude entry of each component is positive) so
repeated fits are bit-identical. The angle scaler maps per-feature training
ranges onto a radian interval; test-time values are clamped into it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataio import FeatureMatrix
from .errors import DimError, NotFitted


@dataclass
class PcaModel:
    mean: np.ndarray                # (d,)
    components: np.ndarray          # (m, d), orthonormal rows
    explained_variance: np.ndarray  # (m,), non-increasing
    rank_deficient: bool = False


def pca_fit(X: FeatureMatrix | np.ndarray, m: int) -> PcaModel:
    """Top-m principal directions of the centered data."""
    data = X.data if isinstance(X, FeatureMatrix) else np.asarray(X)
    data = data.astype(np.float64)
    n, d = data.shape
    if not 1 <= m <= min(n, d):
        raise DimError(f"m={m} outside [1, min(rows={n}, cols={d})]")
    mean = data.mean(axis=0)
    centered = data - mean
    # economy SVD: right singular vectors are the principal directions
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:m].copy()
    explained = (s[:m] ** 2) / max(n - 1, 1)

    # deterministic sign: largest-|entry| of each component made positive
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0

    tol = max(n, d) * np.finfo(np.float64).eps * (s[0] if len(s) else 0.0)
    numerical_rank = int(np.sum(s > tol))
    deficient = m > numerical_rank
    if deficient:
        explained = explained.copy()
        explained[numerical_rank:] = 0.0
    return PcaModel(
        mean=mean,
        components=components,
        explained_variance=explained,
        rank_deficient=deficient,
    )


def pca_transform(model: PcaModel, X: FeatureMatrix | np.ndarray) -> FeatureMatrix:
    """(X - mean) @ componentsᵀ, keeping labels when present."""
    labels = X.labels if isinstance(X, FeatureMatrix) else None
    data = X.data if isinstance(X, FeatureMatrix) else np.asarray(X)
    if data.shape[1] != model.mean.shape[0]:
        raise DimError(
            f"input has {data.shape[1]} cols, model expects {model.mean.shape[0]}"
        )
    out = (data.astype(np.float64) - model.mean) @ model.components.T
    return FeatureMatrix(data=out, labels=labels)


def pca_inverse_transform(model: PcaModel, X: FeatureMatrix | np.ndarray) -> np.ndarray:
    data = X.data if isinstance(X, FeatureMatrix) else np.asarray(X)
    if data.shape[1] != model.components.shape[0]:
        raise DimError("column count does not match component count")
    return data @ model.components + model.mean


@dataclass
class AngleScaler:
    """Maps training-fold feature ranges onto [lo, hi] radians.

    ``per-feature`` mode rescales every column by its own training min/max;
    ``global`` mode uses one min/max over all entries, preserving relative
    magnitudes across homogeneous features such as pixels.
    """

    lo: float = -math.pi
    hi: float = math.pi
    mode: str = "per-feature"
    feat_min: np.ndarray | None = None
    feat_max: np.ndarray | None = None

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DimError(f"target range [{self.lo}, {self.hi}] is empty")
        if self.mode not in ("per-feature", "global"):
            raise ValueError(f"unknown scaler mode {self.mode!r}")

    def fit(self, X: FeatureMatrix | np.ndarray) -> "AngleScaler":
        data = X.data if isinstance(X, FeatureMatrix) else np.asarray(X)
        if self.mode == "global":
            lo, hi = float(data.min()), float(data.max())
            self.feat_min = np.full(data.shape[1], lo)
            self.feat_max = np.full(data.shape[1], hi)
        else:
            self.feat_min = data.min(axis=0).astype(np.float64)
            self.feat_max = data.max(axis=0).astype(np.float64)
        return self


def scale_angles(scaler: AngleScaler, X: FeatureMatrix | np.ndarray) -> FeatureMatrix:
    """Map features into [lo, hi] radians using the fitted training ranges.

    Constant training features land on the midpoint; out-of-range test
    values are clamped to the interval ends.
    """
    if scaler.feat_min is None or scaler.feat_max is None:
        raise NotFitted("scale_angles called before AngleScaler.fit")
    labels = X.labels if isinstance(X, FeatureMatrix) else None
    data = X.data if isinstance(X, FeatureMatrix) else np.asarray(X)
    if data.shape[1] != scaler.feat_min.shape[0]:
        raise DimError(
            f"input has {data.shape[1]} cols, scaler fitted on {scaler.feat_min.shape[0]}"
        )
    span = scaler.feat_max - scaler.feat_min
    mid = 0.5 * (scaler.lo + scaler.hi)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = (data.astype(np.float64) - scaler.feat_min) / span
    out = scaler.lo + unit * (scaler.hi - scaler.lo)
    out[:, span == 0.0] = mid
    np.clip(out, scaler.lo, scaler.hi, out=out)
    return FeatureMatrix(data=out, labels=labels)

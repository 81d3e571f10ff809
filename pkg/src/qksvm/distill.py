"""Class-balanced k-means distillation: keep the real sample nearest each centroid.

Clustering runs independently per class, so a 10-class dataset distilled at
200 prototypes per class yields exactly 2000 real samples and no class
imbalance. The quadratic kernel workload then scales with the distilled
count instead of the full dataset size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataio import FeatureMatrix
from .errors import EmptyInput, KExceedsPopulation


@dataclass
class DistillConfig:
    k_per_class: int = 200
    max_iters: int = 300
    tol: float = 1e-4
    seed: int = 0


@dataclass
class DistilledSet:
    indices: dict[int, np.ndarray]  # class id -> selected original indices
    features: FeatureMatrix
    labels: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.features.rows


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each next center drawn with probability ∝ D²."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    first = rng.integers(n)
    centers[0] = points[first]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining points coincide with a chosen center
            centers[c:] = points[rng.integers(n, size=k - c)]
            break
        probs = d2 / total
        idx = rng.choice(n, p=probs)
        centers[c] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[c]) ** 2, axis=1))
    return centers


def kmeans(
    points: np.ndarray | FeatureMatrix,
    k: int,
    cfg: DistillConfig | None = None,
    history: list | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Lloyd iterations with k-means++ seeding.

    Returns (centroids, assignments, inertia). Inertia is non-increasing
    across iterations (appended to ``history`` when given); empty clusters
    are reseeded with the point farthest from its centroid.
    """
    if isinstance(points, FeatureMatrix):
        points = points.data
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise EmptyInput("kmeans needs a non-empty 2-D point set")
    n = points.shape[0]
    if k < 1 or k > n:
        raise KExceedsPopulation(f"k={k} outside [1, {n}]")
    cfg = cfg or DistillConfig()
    rng = np.random.default_rng(cfg.seed)

    centers = _kmeans_pp_init(points, k, rng)
    assign = np.zeros(n, dtype=np.int64)
    sq = np.einsum("ij,ij->i", points, points)
    inertia = np.inf
    for _ in range(cfg.max_iters):
        # squared distances via ||p||^2 - 2 p.c + ||c||^2
        d2 = sq[:, None] - 2.0 * points @ centers.T + np.einsum("ij,ij->i", centers, centers)[None, :]
        np.maximum(d2, 0.0, out=d2)
        assign = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), assign].sum())
        if history is not None:
            history.append(inertia)

        new_centers = centers.copy()
        shift = 0.0
        for c in range(k):
            members = points[assign == c]
            if len(members) == 0:
                far = int(np.argmax(d2[np.arange(n), assign]))
                new_centers[c] = points[far]
            else:
                new_centers[c] = members.mean(axis=0)
            shift = max(shift, float(np.linalg.norm(new_centers[c] - centers[c])))
        centers = new_centers
        if shift < cfg.tol:
            break
    d2 = sq[:, None] - 2.0 * points @ centers.T + np.einsum("ij,ij->i", centers, centers)[None, :]
    np.maximum(d2, 0.0, out=d2)
    assign = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(n), assign].sum())
    return centers, assign, inertia


def _prototypes_for_class(
    feats: np.ndarray, class_idx: np.ndarray, k: int, cfg: DistillConfig
) -> np.ndarray:
    """Nearest real member per centroid; collisions take the next-nearest unused one."""
    if len(class_idx) == k:
        return np.sort(class_idx)
    centers, _, _ = kmeans(feats, k, cfg)
    sq = np.einsum("ij,ij->i", feats, feats)
    chosen: list[int] = []
    used = np.zeros(len(class_idx), dtype=bool)
    for c in range(k):
        d2 = sq - 2.0 * feats @ centers[c] + float(centers[c] @ centers[c])
        order = np.argsort(d2, kind="stable")  # stable sort -> lowest index wins ties
        for local in order:
            if not used[local]:
                used[local] = True
                chosen.append(int(class_idx[local]))
                break
    return np.array(sorted(chosen), dtype=np.int64)


def distill(data: FeatureMatrix, cfg: DistillConfig) -> DistilledSet:
    """Per class: k-means, then select the real member nearest each centroid."""
    if data.labels is None:
        raise EmptyInput("distill requires labeled features")
    labels = data.labels
    classes = np.unique(labels)
    per_class: dict[int, np.ndarray] = {}
    for cls in classes:
        class_idx = np.flatnonzero(labels == cls)
        if len(class_idx) < cfg.k_per_class:
            raise KExceedsPopulation(
                f"class {cls} has {len(class_idx)} samples < k={cfg.k_per_class}"
            )
        class_cfg = DistillConfig(
            k_per_class=cfg.k_per_class,
            max_iters=cfg.max_iters,
            tol=cfg.tol,
            seed=cfg.seed + int(cls),  # decorrelate per-class clustering
        )
        feats = data.data[class_idx].astype(np.float64)
        per_class[int(cls)] = _prototypes_for_class(
            feats, class_idx, cfg.k_per_class, class_cfg
        )

    all_idx = np.concatenate([per_class[int(c)] for c in classes])
    return DistilledSet(
        indices=per_class,
        features=FeatureMatrix(data=data.data[all_idx], labels=labels[all_idx]),
        labels=labels[all_idx],
    )


def split(
    ds: DistilledSet, train_frac: float = 0.8, seed: int = 0
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Stratified train/test split; round(k_per_class * frac) per class to train."""
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac {train_frac} outside (0, 1)")
    rng = np.random.default_rng(seed)
    labels = ds.labels
    train_rows: list[np.ndarray] = []
    test_rows: list[np.ndarray] = []
    for cls in np.unique(labels):
        rows = np.flatnonzero(labels == cls)
        rows = rows[rng.permutation(len(rows))]
        n_train = round(len(rows) * train_frac)
        train_rows.append(np.sort(rows[:n_train]))
        test_rows.append(np.sort(rows[n_train:]))
    tr = np.concatenate(train_rows)
    te = np.concatenate(test_rows)
    train = FeatureMatrix(data=ds.features.data[tr], labels=labels[tr])
    test = FeatureMatrix(data=ds.features.data[te], labels=labels[te])
    return train, test

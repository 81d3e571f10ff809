"""Cross-validation, metric computation, and the quantum-vs-classical benchmark.

``run_benchmark`` drives the whole pipeline for both arms on identical
features: distill -> reduce -> gram -> 5-fold CV -> best-fold model ->
held-out test. The quantum arm uses the fidelity-kernel Gram (sv or tn
backend); the classical arm uses an RBF kernel with gamma='scale' resolved
on each fold's training features. The relative advantage is
(quantum - classical) / classical * 100 on held-out accuracy.
"""

from __future__ import annotations

import csv
import json
import resource
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig, config_hash
from .dataio import FeatureMatrix, flatten_pixels, load_image_set, read_emb1
from .distill import DistillConfig, distill, split
from .errors import ClassTooSmall, LengthMismatch, StageFailure
from .featuremap import CircuitConfig
from .kernel import dataset_hash, gram_cross, gram_train, rbf_gram, resolve_gamma
from .reduce import AngleScaler, pca_fit, pca_transform, scale_angles
from .svm import SvmModel, SvmParams, predict, train_multiclass


@dataclass
class FoldPlan:
    k: int
    folds: list[tuple[np.ndarray, np.ndarray]]  # (train_idx, val_idx) per fold
    seed: int


def stratified_kfold(labels, k: int, seed: int = 0) -> FoldPlan:
    """Deterministic stratified folds; every class spreads within ±1 sample."""
    labels = np.asarray(labels).ravel()
    rng = np.random.default_rng(seed)
    val_sets: list[list[np.ndarray]] = [[] for _ in range(k)]
    for cls in np.unique(labels):
        rows = np.flatnonzero(labels == cls)
        if len(rows) < k:
            raise ClassTooSmall(f"class {cls} has {len(rows)} samples < k={k}")
        rows = rows[rng.permutation(len(rows))]
        for f in range(k):
            val_sets[f].append(rows[f::k])
    all_idx = np.arange(len(labels))
    folds = []
    for f in range(k):
        val = np.sort(np.concatenate(val_sets[f]))
        train = np.setdiff1d(all_idx, val, assume_unique=True)
        folds.append((train, val))
    return FoldPlan(k=k, folds=folds, seed=seed)


@dataclass
class Metrics:
    accuracy: float
    precision_macro: float
    f1_macro: float
    auc_macro: float
    confusion: np.ndarray  # rows = true class, cols = predicted

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision_macro": self.precision_macro,
            "f1_macro": self.f1_macro,
            "auc_macro": self.auc_macro,
            "confusion": self.confusion.tolist(),
        }


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _auc_ovr(y_true: np.ndarray, scores: np.ndarray) -> float:
    """Rank-statistic AUC of one class-vs-rest score column."""
    pos = y_true
    n_pos = int(pos.sum())
    n_neg = len(pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = _average_ranks(scores)
    return (ranks[pos].sum() - 0.5 * n_pos * (n_pos + 1)) / (n_pos * n_neg)


def compute_metrics(y_true, y_pred, scores, classes=None) -> Metrics:
    """Accuracy plus macro precision / F1 / one-vs-rest AUC.

    ``scores`` has one column per entry of ``classes`` (higher favors the
    class). Classes absent from ``y_true`` are excluded from the macro means.
    """
    y_true = np.asarray(y_true).ravel()
    y_pred = np.asarray(y_pred).ravel()
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} true vs {len(y_pred)} predicted")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape[0] != len(y_true):
        raise LengthMismatch("score rows do not match label count")
    if classes is None:
        classes = np.unique(np.concatenate([y_true, y_pred]))
    classes = np.asarray(classes)
    if scores.shape[1] != len(classes):
        raise LengthMismatch("score columns do not match class count")

    idx = {int(c): i for i, c in enumerate(classes)}
    n_cls = len(classes)
    confusion = np.zeros((n_cls, n_cls), dtype=np.int64)
    for t, pr in zip(y_true, y_pred):
        confusion[idx[int(t)], idx[int(pr)]] += 1

    accuracy = float((y_true == y_pred).mean()) if len(y_true) else float("nan")
    present = [i for i, c in enumerate(classes) if (y_true == c).any()]
    precisions, f1s, aucs = [], [], []
    for i in present:
        tp = confusion[i, i]
        fp = confusion[:, i].sum() - tp
        fn = confusion[i, :].sum() - tp
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        precisions.append(prec)
        f1s.append(f1)
        auc = _auc_ovr(y_true == classes[i], scores[:, i])
        if not np.isnan(auc):
            aucs.append(auc)
    return Metrics(
        accuracy=accuracy,
        precision_macro=float(np.mean(precisions)) if precisions else float("nan"),
        f1_macro=float(np.mean(f1s)) if f1s else float("nan"),
        auc_macro=float(np.mean(aucs)) if aucs else float("nan"),
        confusion=confusion,
    )


@dataclass
class ArmReport:
    """CV and held-out results for one kernel arm (quantum or classical)."""

    name: str
    fold_metrics: list[Metrics]
    heldout: Metrics | None
    best_fold: int
    wall_time_s: float
    peak_mem_mb: float
    feature_hash: str

    def cv_mean_std(self, key: str) -> tuple[float, float]:
        vals = np.array([getattr(m, key) for m in self.fold_metrics])
        return float(vals.mean()), float(vals.std())

    def as_dict(self) -> dict:
        mean, std = self.cv_mean_std("accuracy")
        return {
            "name": self.name,
            "folds": [m.as_dict() for m in self.fold_metrics],
            "cv_accuracy_mean": mean,
            "cv_accuracy_std": std,
            "heldout": self.heldout.as_dict() if self.heldout else None,
            "best_fold": self.best_fold,
            "wall_time_s": self.wall_time_s,
            "peak_mem_mb": self.peak_mem_mb,
            "feature_hash": self.feature_hash,
        }


@dataclass
class AdvantageReport:
    classical_accuracy: float
    quantum_accuracy: float
    advantage_pct: float


def relative_advantage(classical: float, quantum: float) -> float:
    return (quantum - classical) / classical * 100.0


@dataclass
class BenchmarkResult:
    config: PipelineConfig
    config_hash: str
    quantum: ArmReport
    classical: ArmReport
    advantage: AdvantageReport | None
    notes: dict = field(default_factory=dict)


def _peak_mem_mb() -> float:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def _load_features(cfg: PipelineConfig) -> FeatureMatrix:
    if cfg.feature_source == "pixels":
        images_path, labels_path = cfg.dataset_paths()
        return flatten_pixels(load_image_set(images_path, labels_path, cfg.dataset))
    feats = read_emb1(cfg.feature_file)
    if feats.labels is None:
        raise StageFailure("load", ValueError("EMB1 feature file carries no labels"))
    return feats


def _cv_arm(
    name: str,
    K_train: np.ndarray,
    K_cross_full: np.ndarray | None,
    labels: np.ndarray,
    test_labels: np.ndarray,
    plan: FoldPlan,
    params: SvmParams,
    classes: np.ndarray,
    feature_hash: str,
    t0: float,
    rbf_features: tuple[FeatureMatrix, FeatureMatrix] | None = None,
    parallel_folds: bool = False,
) -> ArmReport:
    """Run CV + held-out evaluation for one arm.

    Quantum arm: ``K_train``/``K_cross_full`` are precomputed fidelity
    Grams, folds index into them. Classical arm: pass ``rbf_features`` and
    kernels are built per fold with gamma resolved on the fold's train side.
    Folds run sequentially unless ``parallel_folds``; each fold's state is
    independent, so the results are identical either way.
    """

    def run_fold(fold: tuple[np.ndarray, np.ndarray]) -> tuple[Metrics, SvmModel]:
        tr, val = fold
        if rbf_features is None:
            K_fold = K_train[np.ix_(tr, tr)]
            K_val = K_train[np.ix_(val, tr)]
        else:
            train_feats = rbf_features[0]
            g = resolve_gamma("scale", train_feats.data[tr])
            K_fold = rbf_gram(train_feats.data[tr], gamma=g).values
            K_val = rbf_gram(train_feats.data[val], train_feats.data[tr], gamma=g).values
        model = train_multiclass(K_fold, labels[tr], params)
        y_pred, scores = predict(model, K_val)
        return compute_metrics(labels[val], y_pred, scores, classes), model

    if parallel_folds and len(plan.folds) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=len(plan.folds)) as pool:
            results = list(pool.map(run_fold, plan.folds))
    else:
        results = [run_fold(f) for f in plan.folds]
    fold_metrics = [m for m, _ in results]
    fold_models = [mod for _, mod in results]

    accs = [m.accuracy for m in fold_metrics]
    best = int(np.argmax(accs))  # argmax returns the first (lowest) max index
    heldout = None
    if len(test_labels):
        tr_best = plan.folds[best][0]
        if rbf_features is None:
            K_test = K_cross_full[:, tr_best]
        else:
            train_feats, test_feats = rbf_features
            g = resolve_gamma("scale", train_feats.data[tr_best])
            K_test = rbf_gram(test_feats.data, train_feats.data[tr_best], gamma=g).values
        y_pred, scores = predict(fold_models[best], K_test)
        heldout = compute_metrics(test_labels, y_pred, scores, classes)
    return ArmReport(
        name=name,
        fold_metrics=fold_metrics,
        heldout=heldout,
        best_fold=best,
        wall_time_s=time.perf_counter() - t0,
        peak_mem_mb=_peak_mem_mb(),
        feature_hash=feature_hash,
    )


def run_benchmark(cfg: PipelineConfig, out_dir: str | Path | None = None) -> BenchmarkResult:
    """Full pipeline for both arms; emits report.json + summary.csv + confusion CSVs."""
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)
    partial: dict = {"config_hash": chash, "status": "running"}

    def persist_partial(stage: str, err: Exception):
        partial["status"] = f"failed at {stage}: {err}"
        (out / "report.json").write_text(json.dumps(partial, indent=2))

    stage = "load"
    try:
        features = _load_features(cfg)

        stage = "distill"
        ds = distill(features, DistillConfig(k_per_class=cfg.k_per_class, seed=cfg.distill_seed))
        train, test = split(ds, cfg.train_frac, cfg.split_seed)
        partial["distilled"] = ds.n_samples

        stage = "reduce"
        notes = {
            "macro_averaging": True,
            "pca_fit_scope": "train-split",
            "gamma_convention": "scale on fold-train features",
            "multiclass": "one-vs-one",
            "auc_scores": "aggregated decision values (no Platt scaling)",
        }
        if cfg.pca_dim:
            pca = pca_fit(train, cfg.pca_dim)
            train = pca_transform(pca, train)
            test = pca_transform(pca, test)
            notes["pca_dim"] = cfg.pca_dim
        notes["scaler_mode"] = cfg.scaler_mode
        scaler = AngleScaler(
            lo=cfg.angle_lo, hi=cfg.angle_hi, mode=cfg.scaler_mode
        ).fit(train)
        train = scale_angles(scaler, train)
        test = scale_angles(scaler, test)

        # both arms consume byte-identical features
        train_hash, test_hash = dataset_hash(train), dataset_hash(test)
        feature_hash = f"{train_hash}x{test_hash}"

        stage = "cv-plan"
        class_counts = np.unique(train.labels, return_counts=True)[1]
        cv_k = min(cfg.cv_k, int(class_counts.min()))
        if cv_k < cfg.cv_k:
            notes["cv_k_clamped"] = cv_k
        plan = stratified_kfold(train.labels, cv_k, cfg.cv_seed)
        classes = np.unique(train.labels)
        params = SvmParams(
            C=cfg.svm_c, tol_kkt=cfg.svm_tol, probability=cfg.svm_probability
        )
        threads = cfg.resolved_threads()

        stage = "gram"
        t0 = time.perf_counter()
        circ = CircuitConfig(n_qubits=cfg.n_qubits)
        Kq = gram_train(train, circ, backend=cfg.backend, threads=threads)
        Kq_cross = None
        if test.rows:
            Kq_cross = gram_cross(test, train, circ, backend=cfg.backend, threads=threads)

        stage = "quantum-arm"
        quantum = _cv_arm(
            "quantum", Kq.values,
            Kq_cross.values if Kq_cross is not None else None,
            train.labels, test.labels if test.rows else np.array([]),
            plan, params, classes, feature_hash, t0,
            parallel_folds=cfg.parallel_folds and not cfg.strict,
        )

        stage = "classical-arm"
        t1 = time.perf_counter()
        classical = _cv_arm(
            "classical", None, None,
            train.labels, test.labels if test.rows else np.array([]),
            plan, params, classes, feature_hash, t1,
            rbf_features=(train, test),
            parallel_folds=cfg.parallel_folds and not cfg.strict,
        )
        assert quantum.feature_hash == classical.feature_hash

        advantage = None
        if quantum.heldout and classical.heldout:
            advantage = AdvantageReport(
                classical_accuracy=classical.heldout.accuracy,
                quantum_accuracy=quantum.heldout.accuracy,
                advantage_pct=relative_advantage(
                    classical.heldout.accuracy, quantum.heldout.accuracy
                ),
            )
        result = BenchmarkResult(
            config=cfg, config_hash=chash, quantum=quantum,
            classical=classical, advantage=advantage, notes=notes,
        )
        _write_reports(result, out)
        return result
    except Exception as exc:
        persist_partial(stage, exc)
        if isinstance(exc, StageFailure):
            raise
        raise StageFailure(stage, exc) from exc


def _fmt(v: float | None, strict: bool, timing: bool = False) -> str:
    if v is None or (timing and strict):
        return ""
    return f"{v:.6f}"


def _write_reports(result: BenchmarkResult, out: Path) -> None:
    cfg = result.config
    doc = {
        "config": {k: getattr(cfg, k) for k in cfg.__dataclass_fields__},
        "config_hash": result.config_hash,
        "quantum": result.quantum.as_dict(),
        "classical": result.classical.as_dict(),
        "advantage": (
            {
                "classical_accuracy": result.advantage.classical_accuracy,
                "quantum_accuracy": result.advantage.quantum_accuracy,
                "advantage_pct": result.advantage.advantage_pct,
            }
            if result.advantage
            else None
        ),
        "notes": result.notes,
        "status": "ok",
    }
    (out / "report.json").write_text(json.dumps(doc, indent=2))

    strict = cfg.strict
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["dataset", "embedding", "arm", "test_acc", "precision", "f1", "auc",
             "cv_acc_mean", "cv_acc_std", "advantage_pct", "time_s", "memory_mb",
             "config_hash"]
        )
        for arm in (result.classical, result.quantum):
            mean, std = arm.cv_mean_std("accuracy")
            h = arm.heldout
            w.writerow([
                cfg.dataset,
                cfg.label or cfg.feature_source,
                arm.name,
                _fmt(h.accuracy if h else None, strict),
                _fmt(h.precision_macro if h else None, strict),
                _fmt(h.f1_macro if h else None, strict),
                _fmt(h.auc_macro if h else None, strict),
                _fmt(mean, strict),
                _fmt(std, strict),
                _fmt(result.advantage.advantage_pct if result.advantage and arm.name == "quantum" else None, strict),
                _fmt(arm.wall_time_s, strict, timing=True),
                _fmt(arm.peak_mem_mb, strict, timing=True),
                result.config_hash,
            ])

    for arm in (result.classical, result.quantum):
        for f, m in enumerate(arm.fold_metrics):
            np.savetxt(
                out / f"confusion_{arm.name}_fold{f}.csv",
                m.confusion, fmt="%d", delimiter=",",
            )
        if arm.heldout is not None:
            np.savetxt(
                out / f"confusion_{arm.name}_heldout.csv",
                arm.heldout.confusion, fmt="%d", delimiter=",",
            )

"""C-SVC on precomputed kernels via sequential minimal optimization.

The binary solver works on the standard dual

    min  0.5 aᵀQa - eᵀa   with  Q_ij = y_i y_j K_ij,  0 <= a_i <= C,  yᵀa = 0

using max-violating-pair working-set selection: stop once the KKT gap
m(a) - M(a) drops below ``tol_kkt``. Multiclass is one-vs-one with vote
aggregation; per-class scores sum the signed pair decision values so AUC
can be computed without probability calibration.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import DimError, NonFiniteKernel, SingleClassInput
from .kernel import GramMatrix


@dataclass
class SvmParams:
    C: float = 1.0
    tol_kkt: float = 1e-3
    max_passes: int = 10_000_000
    seed: int = 0
    # fit Platt sigmoids on training decisions; per-class scores then
    # aggregate calibrated probabilities instead of raw decision values
    probability: bool = False

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError(f"C must be positive, got {self.C}")


@dataclass
class BinaryModel:
    support: np.ndarray      # row indices into the training kernel
    coef: np.ndarray         # alpha_i * y_i at the support rows
    bias: float
    dual_objective: float    # maximization form: sum(a) - 0.5 aᵀQa
    kkt_gap: float
    n_iter: int
    platt: tuple[float, float] | None = None  # sigmoid (A, B), when fitted

    def decision(self, Kcross: np.ndarray) -> np.ndarray:
        """f(x) = sum_i coef_i K(x, x_i) + b for each kernel row."""
        return Kcross[:, self.support] @ self.coef + self.bias

    def proba(self, Kcross: np.ndarray) -> np.ndarray:
        """Calibrated P(class = +1) via the fitted Platt sigmoid."""
        if self.platt is None:
            raise ValueError("model trained without probability=True")
        a, b = self.platt
        z = a * self.decision(Kcross) + b
        # numerically safe 1 / (1 + exp(z))
        return np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)),
                        1.0 / (1.0 + np.exp(z)))


def _fit_platt(decision: np.ndarray, y: np.ndarray, max_iter: int = 100) -> tuple[float, float]:
    """Sigmoid calibration: minimize the NLL of P = 1/(1+exp(A f + B)).

    Newton iterations with the usual target smoothing; robust to separable
    inputs because the targets never reach 0 or 1.
    """
    n_pos = float((y > 0).sum())
    n_neg = float(len(y) - n_pos)
    t = np.where(y > 0, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    A, B = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    f = decision
    for _ in range(max_iter):
        z = A * f + B
        p = np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))
        w = np.maximum(p * (1.0 - p), 1e-12)
        g = t - p  # dNLL/dz per sample (p = sigma(-z), so the sign flips)
        g1 = float(g @ f)
        g2 = float(g.sum())
        if abs(g1) < 1e-10 and abs(g2) < 1e-10:
            break
        h11 = float(w @ (f * f)) + 1e-12
        h12 = float(w @ f)
        h22 = float(w.sum()) + 1e-12
        det = h11 * h22 - h12 * h12
        if det <= 0:
            break
        A -= (h22 * g1 - h12 * g2) / det
        B -= (h11 * g2 - h12 * g1) / det
    return A, B


def _as_values(K) -> np.ndarray:
    return K.values if isinstance(K, GramMatrix) else np.asarray(K, dtype=np.float64)


def smo_train_binary(
    K, y, p: SvmParams | None = None, history: list | None = None
) -> BinaryModel:
    """Train one binary C-SVC on a precomputed square kernel with labels ±1.

    When ``history`` is given, the dual objective after each accepted step
    is appended to it (non-decreasing by construction).
    """
    p = p or SvmParams()
    Kv = _as_values(K)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = len(y)
    if Kv.shape != (n, n):
        raise DimError(f"kernel {Kv.shape} does not match {n} labels")
    if not np.all(np.isfinite(Kv)):
        raise NonFiniteKernel("kernel contains non-finite entries")
    if np.all(y > 0) or np.all(y < 0):
        raise SingleClassInput("labels contain a single class")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("binary labels must be +1/-1")

    C = p.C
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the min-form dual at a = 0
    it = 0
    gap = np.inf
    while it < p.max_passes:
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(yg[low])])
        gap = yg[i] - yg[j]
        if gap <= p.tol_kkt:
            break

        quad = Kv[i, i] + Kv[j, j] - 2.0 * Kv[i, j]
        if quad <= 0.0:
            quad = 1e-12
        # step t moves a_i by +y_i t and a_j by -y_j t, keeping yᵀa fixed
        t = gap / quad
        room_i = alpha[i] if y[i] < 0 else C - alpha[i]
        room_j = alpha[j] if y[j] > 0 else C - alpha[j]
        t = min(t, room_i, room_j)
        if t <= 0.0:
            break  # box-bound degenerate; gap reported as-is
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        np.clip(alpha, 0.0, C, out=alpha)
        grad += t * y * (Kv[:, i] - Kv[:, j])
        it += 1
        if history is not None:
            history.append(float(0.5 * (alpha.sum() - grad @ alpha)))

    # bias: average over free vectors, else midpoint of the violating bounds
    yg = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(yg[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = yg[up].max() if up.any() else 0.0
        lo = yg[low].min() if low.any() else 0.0
        bias = float(0.5 * (hi + lo))

    # W(a) = eᵀa - 0.5 aᵀQa, rewritten through the tracked gradient
    objective = float(0.5 * (alpha.sum() - grad @ alpha))
    support = np.flatnonzero(alpha > 0)
    return BinaryModel(
        support=support,
        coef=(alpha * y)[support],
        bias=bias,
        dual_objective=objective,
        kkt_gap=float(gap if np.isfinite(gap) else 0.0),
        n_iter=it,
    )


@dataclass
class SvmModel:
    classes: np.ndarray                       # sorted class ids
    pairs: list[tuple[int, int]]              # (a, b) with a < b
    models: list[BinaryModel]                 # pair models; support indices are global
    n_train: int = 0
    kernel_hash: str = ""
    params: SvmParams = field(default_factory=SvmParams)


def train_multiclass(K, labels, p: SvmParams | None = None) -> SvmModel:
    """One binary SMO per class pair on the pair's kernel submatrix."""
    p = p or SvmParams()
    Kv = _as_values(K)
    labels = np.asarray(labels).ravel()
    classes = np.unique(labels)
    if len(classes) < 2:
        raise SingleClassInput(f"need >= 2 classes, got {classes}")
    kernel_hash = ""
    if isinstance(K, GramMatrix):
        kernel_hash = K.meta.get("dataset_hash", "")
    if not kernel_hash:
        kernel_hash = hashlib.sha256(Kv.tobytes()).hexdigest()[:16]

    pairs: list[tuple[int, int]] = []
    models: list[BinaryModel] = []
    for a, b in combinations(classes.tolist(), 2):
        rows = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[rows] == a, 1.0, -1.0)
        Ksub = Kv[np.ix_(rows, rows)]
        sub = smo_train_binary(Ksub, y, p)
        if p.probability:
            sub.platt = _fit_platt(sub.decision(Ksub), y)
        # lift submatrix support indices back to global training rows
        sub.support = rows[sub.support]
        pairs.append((int(a), int(b)))
        models.append(sub)
    return SvmModel(
        classes=classes, pairs=pairs, models=models, n_train=len(labels),
        kernel_hash=kernel_hash, params=p,
    )


def predict(model: SvmModel, Kcross) -> tuple[np.ndarray, np.ndarray]:
    """One-vs-one vote over pair decisions.

    Returns (labels, scores) where scores[:, c] sums the signed decision
    values of every pair involving class c (positive favors the class).
    With probability-trained models, scores aggregate the Platt-calibrated
    pair probabilities instead. Vote ties resolve to the lower class id.
    """
    Kv = _as_values(Kcross)
    if Kv.ndim != 2 or Kv.shape[1] != model.n_train:
        raise DimError(
            f"cross kernel has shape {Kv.shape}, model was trained on "
            f"{model.n_train} rows"
        )
    n = Kv.shape[0]
    use_proba = model.params.probability and all(
        bm.platt is not None for bm in model.models
    )
    class_pos = {int(c): k for k, c in enumerate(model.classes)}
    votes = np.zeros((n, len(model.classes)), dtype=np.int64)
    scores = np.zeros((n, len(model.classes)), dtype=np.float64)
    for (a, b), bm in zip(model.pairs, model.models):
        d = bm.decision(Kv)
        ia, ib = class_pos[a], class_pos[b]
        if use_proba:
            p = bm.proba(Kv)
            scores[:, ia] += p
            scores[:, ib] += 1.0 - p
        else:
            scores[:, ia] += d
            scores[:, ib] -= d
        votes[d >= 0, ia] += 1  # ties at 0 go to the lower class id
        votes[d < 0, ib] += 1
    winners = np.argmax(votes, axis=1)  # argmax takes the first (lowest) maximum
    return model.classes[winners], scores


def save_model(model: SvmModel, path: str | Path) -> None:
    doc = {
        "classes": model.classes.tolist(),
        "n_train": model.n_train,
        "kernel_hash": model.kernel_hash,
        "params": {
            "C": model.params.C,
            "tol_kkt": model.params.tol_kkt,
            "max_passes": model.params.max_passes,
            "seed": model.params.seed,
            "probability": model.params.probability,
        },
        "pairs": [
            {
                "classes": list(pair),
                "support": bm.support.tolist(),
                "coef": bm.coef.tolist(),
                "bias": bm.bias,
                "dual_objective": bm.dual_objective,
                "kkt_gap": bm.kkt_gap,
                "n_iter": bm.n_iter,
                "platt": list(bm.platt) if bm.platt else None,
            }
            for pair, bm in zip(model.pairs, model.models)
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2))


def load_model(path: str | Path) -> SvmModel:
    doc = json.loads(Path(path).read_text())
    params = SvmParams(**doc["params"])
    pairs = []
    models = []
    for rec in doc["pairs"]:
        pairs.append(tuple(rec["classes"]))
        models.append(
            BinaryModel(
                support=np.asarray(rec["support"], dtype=np.int64),
                coef=np.asarray(rec["coef"], dtype=np.float64),
                bias=rec["bias"],
                dual_objective=rec["dual_objective"],
                kkt_gap=rec["kkt_gap"],
                n_iter=rec["n_iter"],
                platt=tuple(rec["platt"]) if rec.get("platt") else None,
            )
        )
    return SvmModel(
        classes=np.asarray(doc["classes"]),
        pairs=pairs,
        models=models,
        n_train=doc["n_train"],
        kernel_hash=doc["kernel_hash"],
        params=params,
    )

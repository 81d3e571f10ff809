"""Gram matrix production for the fidelity kernel and the classical RBF baseline.

The sv route simulates every encoded state once and turns the Gram fill
into blocked conjugate matrix products; the tn route contracts one closed
network per entry. Both honor the same contract: K[i][j] = |<phi(x_i)|
phi(x_j)>|^2, train Grams are mirrored from the upper triangle with an
analytic unit diagonal, and entries are clamped to [0, 1] after round-off
(logged when the pre-clamp deviation exceeds 1e-9).
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import sv, tn
from .dataio import FeatureMatrix, read_emb1, write_emb1
from .errors import DimError, IoError
from .featuremap import CircuitConfig, build_feature_map

log = logging.getLogger(__name__)

CLAMP_LOG_THRESHOLD = 1e-9


@dataclass
class GramMatrix:
    values: np.ndarray  # (n, m) float64
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def dataset_hash(X: FeatureMatrix | np.ndarray) -> str:
    data = X.data if isinstance(X, FeatureMatrix) else np.asarray(X)
    h = hashlib.sha256(np.ascontiguousarray(data).tobytes())
    if isinstance(X, FeatureMatrix) and X.labels is not None:
        h.update(X.labels.tobytes())
    return h.hexdigest()[:16]


def circuit_hash(cfg: CircuitConfig) -> str:
    doc = json.dumps(
        {"n_qubits": cfg.n_qubits, "layout": list(cfg.layout)}, sort_keys=True
    )
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def _clamp(K: np.ndarray) -> None:
    deviation = max(float(K.max(initial=0.0) - 1.0), float(-K.min(initial=0.0)), 0.0)
    if deviation > CLAMP_LOG_THRESHOLD:
        log.warning("clamping Gram entries; worst out-of-range deviation %.3e", deviation)
    np.clip(K, 0.0, 1.0, out=K)


def _as_array(X) -> np.ndarray:
    return X.data if isinstance(X, FeatureMatrix) else np.asarray(X)


def _meta(backend: str, cfg: CircuitConfig, X, Y, t0: float, entries: int) -> dict:
    return {
        "backend": backend,
        "circuit_hash": circuit_hash(cfg),
        "dataset_hash": dataset_hash(X) if Y is None else
            f"{dataset_hash(X)}x{dataset_hash(Y)}",
        "wall_time_s": time.perf_counter() - t0,
        "entries": entries,
        "numba": sv.numba_active(),
    }


def gram_train(
    X: FeatureMatrix | np.ndarray,
    cfg: CircuitConfig | None = None,
    backend: str = "sv",
    threads: int = 1,
    block_rows: int = 256,
) -> GramMatrix:
    """Symmetric train Gram under the fidelity kernel."""
    cfg = cfg or CircuitConfig()
    data = _as_array(X)
    n = data.shape[0]
    if n < 1:
        raise DimError("gram_train needs at least one row")
    t0 = time.perf_counter()

    if backend == "sv":
        states = sv.batch_states(data, cfg, cache=sv.TrigCache(), threads=threads)
        K = np.empty((n, n), dtype=np.float64)
        for lo in range(0, n, block_rows):
            hi = min(lo + block_rows, n)
            prod = states[lo:hi] @ states.conj().T
            K[lo:hi] = prod.real**2 + prod.imag**2
        entries = n * (n + 1) // 2
    elif backend == "tn":
        circuits = [build_feature_map(data[i], cfg) for i in range(n)]
        K = np.empty((n, n), dtype=np.float64)

        def entry(i: int, j: int) -> float:
            return tn.kernel_value(circuits[i], circuits[j])

        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        if threads > 1 and pairs:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                for (i, j), v in zip(pairs, pool.map(lambda p: entry(*p), pairs)):
                    K[i, j] = v
        else:
            for i, j in pairs:
                K[i, j] = entry(i, j)
        entries = len(pairs) + n
    else:
        raise ValueError(f"unknown backend {backend!r}")

    iu = np.triu_indices(n, 1)
    K[(iu[1], iu[0])] = K[iu]  # mirror: exact symmetry by construction
    np.fill_diagonal(K, 1.0)
    _clamp(K)
    return GramMatrix(values=K, meta=_meta(backend, cfg, X, None, t0, entries))


def gram_cross(
    Xtest: FeatureMatrix | np.ndarray,
    Xtrain: FeatureMatrix | np.ndarray,
    cfg: CircuitConfig | None = None,
    backend: str = "sv",
    threads: int = 1,
    block_rows: int = 256,
) -> GramMatrix:
    """Rectangular Gram: rows are test samples, columns training samples."""
    cfg = cfg or CircuitConfig()
    te, tr = _as_array(Xtest), _as_array(Xtrain)
    if te.shape[1] != tr.shape[1]:
        raise DimError(f"feature dims differ: {te.shape[1]} vs {tr.shape[1]}")
    t0 = time.perf_counter()

    if backend == "sv":
        s_train = sv.batch_states(tr, cfg, cache=sv.TrigCache(), threads=threads)
        s_test = sv.batch_states(te, cfg, cache=sv.TrigCache(), threads=threads)
        K = np.empty((te.shape[0], tr.shape[0]), dtype=np.float64)
        for lo in range(0, te.shape[0], block_rows):
            hi = min(lo + block_rows, te.shape[0])
            prod = s_test[lo:hi] @ s_train.conj().T
            K[lo:hi] = prod.real**2 + prod.imag**2
    elif backend == "tn":
        ket = [build_feature_map(tr[j], cfg) for j in range(tr.shape[0])]
        bra = [build_feature_map(te[i], cfg) for i in range(te.shape[0])]
        K = np.empty((te.shape[0], tr.shape[0]), dtype=np.float64)
        for i in range(te.shape[0]):
            for j in range(tr.shape[0]):
                K[i, j] = tn.kernel_value(bra[i], ket[j])
    else:
        raise ValueError(f"unknown backend {backend!r}")

    _clamp(K)
    return GramMatrix(
        values=K, meta=_meta(backend, cfg, Xtest, Xtrain, t0, K.size)
    )


def resolve_gamma(gamma, X: FeatureMatrix | np.ndarray) -> float:
    """'scale' resolves to 1 / (d * variance of all training-matrix entries)."""
    if gamma == "scale":
        data = _as_array(X)
        var = float(data.var())
        if var <= 0.0:
            var = 1.0
        return 1.0 / (data.shape[1] * var)
    value = float(gamma)
    if value <= 0.0:
        raise ValueError(f"gamma must be positive, got {value}")
    return value


def rbf_gram(
    X: FeatureMatrix | np.ndarray,
    Y: FeatureMatrix | np.ndarray | None = None,
    gamma="scale",
) -> GramMatrix:
    """exp(-gamma * ||x - y||^2); 'scale' is resolved on X (the training side)."""
    xd = _as_array(X).astype(np.float64)
    yd = xd if Y is None else _as_array(Y).astype(np.float64)
    if xd.shape[1] != yd.shape[1]:
        raise DimError(f"feature dims differ: {xd.shape[1]} vs {yd.shape[1]}")
    g = resolve_gamma(gamma, X)
    t0 = time.perf_counter()
    x2 = np.einsum("ij,ij->i", xd, xd)
    y2 = np.einsum("ij,ij->i", yd, yd)
    d2 = x2[:, None] - 2.0 * xd @ yd.T + y2[None, :]
    np.maximum(d2, 0.0, out=d2)
    K = np.exp(-g * d2)
    if Y is None:
        K = 0.5 * (K + K.T)  # exact symmetry despite float dot products
        np.fill_diagonal(K, 1.0)
    return GramMatrix(
        values=K,
        meta={
            "backend": "rbf",
            "gamma": g,
            "dataset_hash": dataset_hash(X),
            "wall_time_s": time.perf_counter() - t0,
            "entries": K.size,
        },
    )


def save_gram(g: GramMatrix, path: str | Path) -> None:
    """Persist as EMB1 (f64) plus a JSON metadata sidecar."""
    write_emb1(FeatureMatrix(data=g.values.astype(np.float64)), path)
    sidecar = Path(str(path) + ".json")
    try:
        sidecar.write_text(json.dumps(g.meta, indent=2, sort_keys=True))
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load_gram(path: str | Path) -> GramMatrix:
    m = read_emb1(path)
    sidecar = Path(str(path) + ".json")
    meta = {}
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
    return GramMatrix(values=m.data.astype(np.float64), meta=meta)


def min_eigenvalue(K: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric kernel matrix (PSD check)."""
    return float(np.linalg.eigvalsh(K)[0])

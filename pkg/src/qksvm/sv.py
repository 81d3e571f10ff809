"""Dense statevector simulation with bit-masked gate kernels.

Amplitude ordering is little-endian: qubit 0 is the least significant bit
of the basis index. Hot loops are numba-compiled when available; setting
``QKSVM_NUMBA=0`` (or calling :func:`set_numba`) routes every gate through
the vectorized numpy path instead. Both paths produce bit-identical
amplitudes.

Trigonometric gate terms are memoized in a :class:`TrigCache` keyed on the
exact f64 bit pattern of the angle, so repeated input values skip the
cos/sin/exp evaluations entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import NUMBA_AVAILABLE, njit
from .dataio import FeatureMatrix
from .errors import MemoryBudgetExceeded, QubitCapExceeded, SizeMismatch
from .featuremap import CNOT, H, RY, RZ, Circuit, CircuitConfig, build_feature_map

DEFAULT_QUBIT_CAP = 24
DEFAULT_MEMORY_BUDGET = 6 * 1024**3  # bytes of packed amplitudes

_SQRT1_2 = 1.0 / math.sqrt(2.0)

_use_numba = NUMBA_AVAILABLE


def set_numba(enabled: bool) -> bool:
    """Select the numba or numpy gate path; returns the active setting."""
    global _use_numba
    _use_numba = bool(enabled) and NUMBA_AVAILABLE
    return _use_numba


def numba_active() -> bool:
    return _use_numba


class TrigCache:
    """Half-angle terms per rotation angle, keyed on exact f64 bits."""

    __slots__ = ("_terms", "hits", "misses")

    def __init__(self):
        self._terms: dict[int, tuple] = {}
        self.hits = 0
        self.misses = 0

    def terms(self, theta: float) -> tuple[float, float, complex, complex]:
        """Returns (cos t/2, sin t/2, e^{-it/2}, e^{+it/2})."""
        key = np.float64(theta).view(np.uint64).item()
        cached = self._terms.get(key)
        if cached is not None:
            self.hits += 1
            return cached
        self.misses += 1
        half = 0.5 * theta
        c, s = math.cos(half), math.sin(half)
        cached = (c, s, complex(c, -s), complex(c, s))
        self._terms[key] = cached
        return cached

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0


def _terms_direct(theta: float) -> tuple[float, float, complex, complex]:
    half = 0.5 * theta
    c, s = math.cos(half), math.sin(half)
    return (c, s, complex(c, -s), complex(c, s))


# numba kernels -------------------------------------------------------------

@njit(cache=True, nogil=True)
def _nb_diag(amps, q, e0, e1):
    mask = 1 << q
    for i in range(amps.shape[0]):
        if i & mask:
            amps[i] *= e1
        else:
            amps[i] *= e0


@njit(cache=True, nogil=True)
def _nb_2x2(amps, q, m00, m01, m10, m11):
    half = amps.shape[0] >> 1
    low = (1 << q) - 1
    bit = 1 << q
    for g in range(half):
        i0 = ((g >> q) << (q + 1)) | (g & low)
        i1 = i0 | bit
        a0 = amps[i0]
        a1 = amps[i1]
        amps[i0] = m00 * a0 + m01 * a1
        amps[i1] = m10 * a0 + m11 * a1


@njit(cache=True, nogil=True)
def _nb_cnot(amps, control, target):
    n_states = amps.shape[0]
    cbit = 1 << control
    tbit = 1 << target
    for i in range(n_states):
        if (i & cbit) and not (i & tbit):
            j = i | tbit
            tmp = amps[i]
            amps[i] = amps[j]
            amps[j] = tmp


# numpy fallback ------------------------------------------------------------

def _np_axis_view(amps: np.ndarray, n: int, q: int) -> np.ndarray:
    """View of the statevector with qubit q moved to the leading axis."""
    return np.moveaxis(amps.reshape((2,) * n), n - 1 - q, 0)


def _np_diag(amps, n, q, e0, e1):
    v = _np_axis_view(amps, n, q)
    v[0] *= e0
    v[1] *= e1


def _np_2x2(amps, n, q, m00, m01, m10, m11):
    v = _np_axis_view(amps, n, q)
    a0 = v[0].copy()
    v[0] *= m00
    v[0] += m01 * v[1]
    v[1] *= m11
    v[1] += m10 * a0


def _np_cnot(amps, n, control, target):
    v = _np_axis_view(amps, n, control)[1]
    t_axis = n - 1 - target
    if t_axis > n - 1 - control:
        t_axis -= 1
    w = np.moveaxis(v, t_axis, 0)
    tmp = w[0].copy()
    w[0] = w[1]
    w[1] = tmp


# gate dispatch -------------------------------------------------------------

def apply_gate(amps: np.ndarray, n: int, gate, cache: TrigCache | None = None) -> None:
    """Apply one gate in place. ``amps`` must hold 2**n complex amplitudes."""
    kind = gate.kind
    if kind == RZ:
        _, _, e0, e1 = cache.terms(gate.angle) if cache else _terms_direct(gate.angle)
        if _use_numba:
            _nb_diag(amps, gate.qubits[0], e0, e1)
        else:
            _np_diag(amps, n, gate.qubits[0], e0, e1)
    elif kind == RY:
        c, s, _, _ = cache.terms(gate.angle) if cache else _terms_direct(gate.angle)
        if _use_numba:
            _nb_2x2(amps, gate.qubits[0], complex(c), complex(-s), complex(s), complex(c))
        else:
            _np_2x2(amps, n, gate.qubits[0], complex(c), complex(-s), complex(s), complex(c))
    elif kind == H:
        r = complex(_SQRT1_2)
        if _use_numba:
            _nb_2x2(amps, gate.qubits[0], r, r, r, -r)
        else:
            _np_2x2(amps, n, gate.qubits[0], r, r, r, -r)
    elif kind == CNOT:
        control, target = gate.qubits
        if _use_numba:
            _nb_cnot(amps, control, target)
        else:
            _np_cnot(amps, n, control, target)
    else:
        raise ValueError(f"unknown gate kind {kind!r}")


def zero_state(n: int, dtype=np.complex128) -> np.ndarray:
    amps = np.zeros(1 << n, dtype=dtype)
    amps[0] = 1.0
    return amps


def simulate(
    c: Circuit,
    cache: TrigCache | None = None,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
    out: np.ndarray | None = None,
    single_precision: bool = False,
) -> np.ndarray:
    """Return U(x)|0...0> as a 2**n complex vector.

    ``single_precision`` switches to complex64 amplitudes for
    memory-constrained runs (roughly 1e-6 accuracy instead of 1e-12).
    """
    n = c.n_qubits
    if n > qubit_cap:
        raise QubitCapExceeded(f"{n} qubits exceeds cap {qubit_cap}")
    if out is None:
        amps = zero_state(n, np.complex64 if single_precision else np.complex128)
    else:
        if out.shape != (1 << n,):
            raise SizeMismatch(f"out buffer shape {out.shape} != ({1 << n},)")
        out[:] = 0.0
        out[0] = 1.0
        amps = out
    for gate in c.gates:
        apply_gate(amps, n, gate, cache)
    return amps


def inner_product(a: np.ndarray, b: np.ndarray) -> complex:
    """<a|b> = sum conj(a_k) b_k."""
    if a.shape != b.shape:
        raise SizeMismatch(f"{a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2, the quantum kernel value for two encoded states."""
    return abs(inner_product(a, b)) ** 2


def batch_states(
    X: FeatureMatrix | np.ndarray,
    cfg: CircuitConfig | None = None,
    cache: TrigCache | None = None,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
    threads: int = 1,
    single_precision: bool = False,
) -> np.ndarray:
    """Simulate one circuit per row of X into a packed (rows, 2**n) matrix.

    Workers write disjoint output rows, so the result is independent of
    ``threads``. With threads > 1 each worker keeps its own TrigCache.
    """
    cfg = cfg or CircuitConfig()
    data = X.data if isinstance(X, FeatureMatrix) else np.asarray(X)
    rows = data.shape[0]
    dim = 1 << cfg.n_qubits
    itemsize = 8 if single_precision else 16
    needed = rows * dim * itemsize
    if needed > memory_budget:
        raise MemoryBudgetExceeded(
            f"{rows} states at {cfg.n_qubits} qubits need {needed} bytes "
            f"> budget {memory_budget}"
        )
    states = np.empty(
        (rows, dim), dtype=np.complex64 if single_precision else np.complex128
    )

    def run(row_ids, worker_cache):
        for i in row_ids:
            simulate(
                build_feature_map(data[i], cfg),
                cache=worker_cache,
                qubit_cap=qubit_cap,
                out=states[i],
            )

    if threads <= 1 or rows < 2:
        run(range(rows), cache)
    else:
        from concurrent.futures import ThreadPoolExecutor

        threads = min(threads, rows)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(run, range(w, rows, threads), TrigCache() if cache else None)
                for w in range(threads)
            ]
            for f in futures:
                f.result()
    return states

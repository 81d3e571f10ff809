"""Einsum-style tensor networks for single-amplitude contraction.

A circuit pair (ket, bra) becomes a closed network evaluating
<0...0| adjoint(bra) ket |0...0>: one rank-2 or rank-4 tensor per gate,
|0> caps on both ends of every qubit wire, every index of dimension 2.
Contraction paths come from three strategies: the fixed sequential order,
a greedy heap minimizing the produced intermediate, and an exhaustive
subset-DP search that is flop-optimal for networks of up to 12 tensors.

Paths are SSA-shaped: original tensors carry ids 0..T-1 and the result of
the i-th merge gets id T+i, so every id is consumed exactly once.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PathInvalid, QubitCountMismatch, TooLargeForExhaustive
from .featuremap import CNOT, H, RY, RZ, Circuit, adjoint

_SQRT1_2 = 1.0 / math.sqrt(2.0)

_H_MAT = np.array([[_SQRT1_2, _SQRT1_2], [_SQRT1_2, -_SQRT1_2]], dtype=np.complex128)
# (out_c, out_t, in_c, in_t); flips the target when the control is 1
_CNOT_T = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
).reshape(2, 2, 2, 2)
_CAP = np.array([1.0, 0.0], dtype=np.complex128)


def _rz_mat(theta: float) -> np.ndarray:
    half = 0.5 * theta
    return np.array(
        [[complex(math.cos(half), -math.sin(half)), 0.0],
         [0.0, complex(math.cos(half), math.sin(half))]],
        dtype=np.complex128,
    )


def _ry_mat(theta: float) -> np.ndarray:
    half = 0.5 * theta
    c, s = math.cos(half), math.sin(half)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


@dataclass
class TensorNetwork:
    tensors: list[np.ndarray]
    labels: list[tuple[int, ...]]
    output: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.tensors) != len(self.labels):
            raise PathInvalid("tensor and label lists differ in length")

    @property
    def n_tensors(self) -> int:
        return len(self.tensors)


@dataclass(frozen=True)
class ContractionPath:
    merges: tuple[tuple[int, int], ...]
    est_flops: int
    est_peak: int
    strategy: str = ""


def circuit_to_network(
    c: Circuit, bra: Circuit, fuse_diagonals: bool = False
) -> TensorNetwork:
    """Closed network for the transition amplitude <0|adjoint(bra) c|0>."""
    if c.n_qubits != bra.n_qubits:
        raise QubitCountMismatch(f"{c.n_qubits} vs {bra.n_qubits} qubits")
    n = c.n_qubits

    tensors: list[np.ndarray] = []
    labels: list[tuple[int, ...]] = []
    next_label = 0

    def fresh() -> int:
        nonlocal next_label
        next_label += 1
        return next_label - 1

    wire = []
    for _ in range(n):
        lbl = fresh()
        tensors.append(_CAP)
        labels.append((lbl,))
        wire.append(lbl)
    # position of the last fusable diagonal tensor per wire, or -1
    last_diag = [-1] * n

    for gate in list(c.gates) + list(adjoint(bra).gates):
        if gate.kind == CNOT:
            ctl, tgt = gate.qubits
            out_c, out_t = fresh(), fresh()
            tensors.append(_CNOT_T)
            labels.append((out_c, out_t, wire[ctl], wire[tgt]))
            wire[ctl], wire[tgt] = out_c, out_t
            last_diag[ctl] = last_diag[tgt] = -1
        else:
            (q,) = gate.qubits
            if gate.kind == RZ:
                mat = _rz_mat(gate.angle)
                if fuse_diagonals and last_diag[q] >= 0:
                    # compose with the previous diagonal on this wire
                    tensors[last_diag[q]] = mat @ tensors[last_diag[q]]
                    continue
            elif gate.kind == RY:
                mat = _ry_mat(gate.angle)
            elif gate.kind == H:
                mat = _H_MAT
            else:
                raise ValueError(f"unknown gate kind {gate.kind!r}")
            out = fresh()
            tensors.append(mat)
            labels.append((out, wire[q]))
            wire[q] = out
            last_diag[q] = len(tensors) - 1 if gate.kind == RZ else -1

    for q in range(n):
        tensors.append(_CAP)
        labels.append((wire[q],))
    return TensorNetwork(tensors=tensors, labels=labels, output=())


def _open_union(a: frozenset, b: frozenset) -> frozenset:
    return a | b


def _merge_open(a: frozenset, b: frozenset) -> frozenset:
    # every index label has at most two owners, so shared labels contract away
    return a ^ b


def _cost_of(merges, label_sets) -> tuple[int, int]:
    """(total flop estimate, peak intermediate size) along an SSA merge list."""
    sets = dict(enumerate(label_sets))
    next_id = len(label_sets)
    flops = 0
    peak = max((1 << len(s)) for s in label_sets) if label_sets else 1
    for a, b in merges:
        sa, sb = sets.pop(a), sets.pop(b)
        flops += 1 << len(sa | sb)
        sc = sa ^ sb
        peak = max(peak, 1 << len(sc))
        sets[next_id] = sc
        next_id += 1
    return flops, peak


def _sequential_merges(t: int) -> tuple[tuple[int, int], ...]:
    if t < 2:
        return ()
    merges = [(0, 1)]
    cur = t
    for k in range(2, t):
        merges.append((cur, k))
        cur += 1
    return tuple(merges)


def _greedy_merges(label_sets: list[frozenset]) -> tuple[tuple[int, int], ...]:
    t = len(label_sets)
    sets: dict[int, frozenset] = dict(enumerate(label_sets))
    owners: dict[int, set[int]] = {}
    for tid, s in sets.items():
        for lbl in s:
            owners.setdefault(lbl, set()).add(tid)

    heap: list[tuple[int, int, int, int]] = []

    def push_pair(a: int, b: int):
        if a > b:
            a, b = b, a
        sa, sb = sets[a], sets[b]
        heapq.heappush(heap, (1 << len(sa ^ sb), 1 << len(sa | sb), a, b))

    seen = set()
    for lbl, own in owners.items():
        if len(own) == 2:
            pair = tuple(sorted(own))
            if pair not in seen:
                seen.add(pair)
                push_pair(*pair)

    merges: list[tuple[int, int]] = []
    next_id = t
    while len(sets) > 1:
        pair = None
        while heap:
            _, _, a, b = heapq.heappop(heap)
            if a in sets and b in sets:
                pair = (a, b)
                break
        if pair is None:
            # disconnected remainder: fold lowest ids together
            a, b = sorted(sets)[:2]
            pair = (a, b)
        a, b = pair
        sa, sb = sets.pop(a), sets.pop(b)
        sc = sa ^ sb
        for lbl in sa & sb:
            owners.pop(lbl, None)
        partners = set()
        for lbl in sc:
            own = owners[lbl]
            own.discard(a)
            own.discard(b)
            own.add(next_id)
            partners.update(x for x in own if x != next_id)
        sets[next_id] = sc
        merges.append((a, b))
        for other in sorted(partners):
            push_pair(other, next_id)
        next_id += 1
    return tuple(merges)


def _exhaustive_merges(label_sets: list[frozenset]) -> tuple[tuple[int, int], ...]:
    t = len(label_sets)
    if t < 2:
        return ()
    full = (1 << t) - 1
    open_of = {0: frozenset()}
    for mask in range(1, full + 1):
        low = mask & -mask
        open_of[mask] = open_of[mask ^ low] ^ label_sets[low.bit_length() - 1]

    best_cost: dict[int, int] = {}
    best_split: dict[int, int] = {}
    for i in range(t):
        best_cost[1 << i] = 0
    masks = sorted(range(1, full + 1), key=lambda m: m.bit_count())
    for mask in masks:
        if mask.bit_count() < 2:
            continue
        lowbit = mask & -mask
        best = None
        sub = (mask - 1) & mask
        while sub:
            if sub & lowbit:  # canonical halves: s1 contains the lowest bit
                s2 = mask ^ sub
                cost = (
                    best_cost[sub]
                    + best_cost[s2]
                    + (1 << len(open_of[sub] | open_of[s2]))
                )
                if best is None or cost < best[0] or (cost == best[0] and sub < best[1]):
                    best = (cost, sub)
            sub = (sub - 1) & mask
        best_cost[mask], best_split[mask] = best

    merges: list[tuple[int, int]] = []
    counter = [t]

    def emit(mask: int) -> int:
        if mask.bit_count() == 1:
            return mask.bit_length() - 1
        s1 = best_split[mask]
        a = emit(s1)
        b = emit(mask ^ s1)
        merges.append((a, b))
        out = counter[0]
        counter[0] += 1
        return out

    emit(full)
    return tuple(merges)


def find_path(net: TensorNetwork, strategy: str = "greedy") -> ContractionPath:
    """Search a contraction order; see module docstring for the strategies."""
    label_sets = [frozenset(lbls) for lbls in net.labels]
    if strategy == "sequential":
        merges = _sequential_merges(net.n_tensors)
    elif strategy == "greedy":
        merges = _greedy_merges(label_sets)
    elif strategy == "exhaustive":
        if net.n_tensors > 12:
            raise TooLargeForExhaustive(
                f"{net.n_tensors} tensors > 12; use greedy or sequential"
            )
        merges = _exhaustive_merges(label_sets)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    flops, peak = _cost_of(merges, label_sets)
    return ContractionPath(merges=merges, est_flops=flops, est_peak=peak, strategy=strategy)


def contract(net: TensorNetwork, path: ContractionPath) -> complex | np.ndarray:
    """Execute a merge list; returns a complex scalar for closed networks."""
    if len(path.merges) != max(net.n_tensors - 1, 0):
        raise PathInvalid(
            f"path has {len(path.merges)} merges for {net.n_tensors} tensors"
        )
    pool: dict[int, tuple[np.ndarray, list[int]]] = {
        i: (np.asarray(t, dtype=np.complex128), list(lbls))
        for i, (t, lbls) in enumerate(zip(net.tensors, net.labels))
    }
    next_id = net.n_tensors
    for a, b in path.merges:
        if a not in pool or b not in pool:
            raise PathInvalid(f"merge ({a}, {b}) references a consumed or unknown id")
        ta, la = pool.pop(a)
        tb, lb = pool.pop(b)
        shared = [l for l in la if l in lb]
        axes_a = [la.index(l) for l in shared]
        axes_b = [lb.index(l) for l in shared]
        tc = np.tensordot(ta, tb, axes=(axes_a, axes_b))
        lc = [l for l in la if l not in shared] + [l for l in lb if l not in shared]
        pool[next_id] = (tc, lc)
        next_id += 1
    ((_, (result, lbls)),) = pool.items()
    if not net.output:
        if lbls:
            raise PathInvalid(f"open labels {lbls} remain on a closed network")
        return complex(result)
    if sorted(lbls) != sorted(net.output):
        raise PathInvalid("remaining labels do not match the declared output")
    perm = [lbls.index(l) for l in net.output]
    return np.transpose(result, perm)


def amplitude(
    ket: Circuit, bra: Circuit, strategy: str = "greedy", fuse_diagonals: bool = False
) -> complex:
    """Convenience wrapper: build, path-find, contract."""
    net = circuit_to_network(ket, bra, fuse_diagonals=fuse_diagonals)
    return complex(contract(net, find_path(net, strategy)))


def kernel_value(
    xi_circuit: Circuit, xj_circuit: Circuit, strategy: str = "greedy",
    fuse_diagonals: bool = False,
) -> float:
    """|<phi(x_i)|phi(x_j)>|^2 via compute-uncompute contraction."""
    return abs(amplitude(xj_circuit, xi_circuit, strategy, fuse_diagonals)) ** 2


def einsum_expression(net: TensorNetwork) -> tuple[str, list[tuple[int, ...]]]:
    """Subscript string plus shapes, for cross-checks with external tools."""
    alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    all_labels = sorted({l for lbls in net.labels for l in lbls})
    if len(all_labels) <= len(alphabet):
        sym = {l: alphabet[i] for i, l in enumerate(all_labels)}
    else:
        sym = {l: chr(0x100 + i) for i, l in enumerate(all_labels)}
    terms = ["".join(sym[l] for l in lbls) for lbls in net.labels]
    out = "".join(sym[l] for l in net.output)
    return ",".join(terms) + "->" + out, [t.shape for t in net.tensors]

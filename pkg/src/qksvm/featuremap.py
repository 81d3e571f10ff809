"""Block-encoded data re-uploading circuit built as a backend-neutral gate list.

Block structure on n qubits: block 0 opens with a Hadamard on every qubit;
each block then consumes 3n features in order -- an RZ layer, an RY layer,
a nearest-neighbor CNOT chain, and a trailing RZ layer. Blocks repeat until
the whole feature vector is consumed; the final partial block is padded
with zero angles (identity rotations up to global phase).

Rotation conventions are pinned because kernels are phase-sensitive across
backends:

    RZ(t) = diag(e^{-it/2}, e^{+it/2})
    RY(t) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]]
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyFeatureVector, QubitCountMismatch

H = "h"
RZ = "rz"
RY = "ry"
CNOT = "cnot"
ROTATIONS = (RZ, RY)
DEFAULT_LAYOUT = (RZ, RY, CNOT, RZ)


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]  # (q,) or (control, target)
    angle: float = 0.0

    def __post_init__(self):
        if self.kind == CNOT:
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise QubitCountMismatch(f"bad CNOT wiring {self.qubits}")
        elif len(self.qubits) != 1:
            raise QubitCountMismatch(f"{self.kind} takes one qubit, got {self.qubits}")


@dataclass(frozen=True)
class CircuitConfig:
    n_qubits: int = 16
    adjoint: bool = False
    layout: tuple[str, ...] = DEFAULT_LAYOUT

    def __post_init__(self):
        if self.n_qubits < 1:
            raise QubitCountMismatch(f"n_qubits={self.n_qubits} < 1")
        for token in self.layout:
            if token not in (*ROTATIONS, CNOT):
                raise ValueError(f"unknown layout token {token!r}")

    @property
    def features_per_block(self) -> int:
        return self.n_qubits * sum(1 for t in self.layout if t in ROTATIONS)


@dataclass(frozen=True)
class Circuit:
    config: CircuitConfig
    gates: tuple[Gate, ...]
    n_features_consumed: int = 0

    @property
    def n_qubits(self) -> int:
        return self.config.n_qubits

    def __len__(self) -> int:
        return len(self.gates)


def n_blocks(n_features: int, cfg: CircuitConfig) -> int:
    return max(1, math.ceil(n_features / cfg.features_per_block))


def gate_count(n_features: int, cfg: CircuitConfig) -> int:
    """Closed-form size: n Hadamards + per block 3n rotations and n-1 CNOTs."""
    n = cfg.n_qubits
    per_block = cfg.features_per_block + sum(
        n - 1 for t in cfg.layout if t == CNOT
    )
    return n + n_blocks(n_features, cfg) * per_block


def build_feature_map(x: np.ndarray, cfg: CircuitConfig | None = None) -> Circuit:
    """Encode a feature vector into the re-uploading circuit U(x)."""
    cfg = cfg or CircuitConfig()
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyFeatureVector("cannot encode an empty feature vector")
    if not np.all(np.isfinite(x)):
        raise EmptyFeatureVector("feature vector contains non-finite values")

    n = cfg.n_qubits
    blocks = n_blocks(x.size, cfg)
    padded = np.zeros(blocks * cfg.features_per_block, dtype=np.float64)
    padded[: x.size] = x

    gates: list[Gate] = [Gate(H, (q,)) for q in range(n)]
    pos = 0
    for _ in range(blocks):
        for token in cfg.layout:
            if token == CNOT:
                for q in range(n - 1):
                    gates.append(Gate(CNOT, (q, q + 1)))
            else:
                for q in range(n):
                    gates.append(Gate(token, (q,), float(padded[pos + q])))
                pos += n
    return Circuit(config=cfg, gates=tuple(gates), n_features_consumed=int(x.size))


def adjoint(c: Circuit) -> Circuit:
    """Reverse the gate list and negate rotation angles (H, CNOT self-inverse)."""
    inv = tuple(
        Gate(g.kind, g.qubits, -g.angle) if g.kind in ROTATIONS else g
        for g in reversed(c.gates)
    )
    cfg = CircuitConfig(
        n_qubits=c.config.n_qubits,
        adjoint=not c.config.adjoint,
        layout=c.config.layout,
    )
    return Circuit(config=cfg, gates=inv, n_features_consumed=c.n_features_consumed)


def concat(a: Circuit, b: Circuit) -> Circuit:
    """Concatenate gate lists; realizes U†(xi) U(xj) for the fidelity kernel."""
    if a.config.n_qubits != b.config.n_qubits:
        raise QubitCountMismatch(
            f"{a.config.n_qubits} qubits vs {b.config.n_qubits}"
        )
    return Circuit(
        config=a.config,
        gates=a.gates + b.gates,
        n_features_consumed=a.n_features_consumed + b.n_features_consumed,
    )


def dump_jsonl(c: Circuit) -> str:
    """One gate per line, for cross-backend golden comparisons."""
    lines = []
    for g in c.gates:
        rec: dict = {"kind": g.kind}
        if g.kind == CNOT:
            rec["control"], rec["target"] = g.qubits
        else:
            rec["qubit"] = g.qubits[0]
        if g.kind in ROTATIONS:
            rec["angle"] = g.angle
        lines.append(json.dumps(rec))
    return "\n".join(lines)

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qksvm.errors import EmptyFeatureVector, QubitCountMismatch
from qksvm.featuremap import (
    CNOT,
    H,
    RY,
    RZ,
    Circuit,
    CircuitConfig,
    Gate,
    adjoint,
    build_feature_map,
    concat,
    dump_jsonl,
    gate_count,
)

from oracles import circuit_unitary, statevector


def empty_circuit(n: int) -> Circuit:
    return Circuit(config=CircuitConfig(n_qubits=n), gates=())


class TestBuildFeatureMap:
    def test_single_block_structure(self):
        # n=4, d=12: 4 H + 4 RZ + 4 RY + 3 CNOT + 4 RZ = 19 gates
        cfg = CircuitConfig(n_qubits=4)
        c = build_feature_map(np.arange(12, dtype=float), cfg)
        assert len(c) == 19
        kinds = [g.kind for g in c.gates]
        assert kinds == [H] * 4 + [RZ] * 4 + [RY] * 4 + [CNOT] * 3 + [RZ] * 4

    def test_feature_order(self):
        cfg = CircuitConfig(n_qubits=2)
        x = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
        c = build_feature_map(x, cfg)
        angles = [g.angle for g in c.gates if g.kind in (RZ, RY)]
        assert angles == x.tolist()

    def test_784_features_on_16_qubits(self):
        cfg = CircuitConfig(n_qubits=16)
        c = build_feature_map(np.linspace(0, 1, 784), cfg)
        # ceil(784/48) = 17 blocks; final block zero-padded with 32 angles
        assert len(c) == 16 + 17 * (48 + 15)
        angles = [g.angle for g in c.gates if g.kind in (RZ, RY)]
        assert len(angles) == 17 * 48
        assert angles[-32:] == [0.0] * 32
        assert c.n_features_consumed == 784

    def test_cnot_chain_is_nearest_neighbor(self):
        cfg = CircuitConfig(n_qubits=5)
        c = build_feature_map(np.ones(15), cfg)
        chains = [g.qubits for g in c.gates if g.kind == CNOT]
        assert chains == [(q, q + 1) for q in range(4)]

    def test_zero_vector_self_kernel_is_one(self):
        cfg = CircuitConfig(n_qubits=2)
        c = build_feature_map(np.zeros(6), cfg)
        psi = statevector(c)
        assert abs(np.vdot(psi, psi)) == pytest.approx(1.0, abs=1e-12)
        # all rotations are identity up to phase: |amp| matches the pure-H state
        href = statevector(
            Circuit(config=cfg, gates=tuple(Gate(H, (q,)) for q in range(2)))
        )
        np.testing.assert_allclose(np.abs(psi), np.abs(href), atol=1e-12)

    def test_empty_vector_rejected(self):
        with pytest.raises(EmptyFeatureVector):
            build_feature_map(np.array([]), CircuitConfig(n_qubits=2))

    @given(n=st.integers(1, 5), d=st.integers(1, 80))
    @settings(max_examples=60, deadline=None)
    def test_depth_formula(self, n, d):
        cfg = CircuitConfig(n_qubits=n)
        c = build_feature_map(np.linspace(-1, 1, d), cfg)
        blocks = math.ceil(d / (3 * n))
        assert len(c) == n + blocks * (3 * n + n - 1)
        assert len(c) == gate_count(d, cfg)

    @given(n=st.integers(1, 4), d=st.integers(1, 30), seed=st.integers(0, 999))
    @settings(max_examples=40, deadline=None)
    def test_feature_to_slot_bijection(self, n, d, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.5, 2.0, d)  # distinct, nonzero values
        c = build_feature_map(x, CircuitConfig(n_qubits=n))
        angles = [g.angle for g in c.gates if g.kind in (RZ, RY)]
        consumed = angles[: len(angles)]  # includes padding zeros at the tail
        # every feature appears exactly once, padding is all zeros
        assert sorted(consumed[:d]) == sorted(x.tolist())
        assert all(a == 0.0 for a in consumed[d:])

    @given(n=st.integers(1, 3), d=st.integers(1, 12), seed=st.integers(0, 999))
    @settings(max_examples=25, deadline=None)
    def test_unitarity(self, n, d, seed):
        rng = np.random.default_rng(seed)
        c = build_feature_map(rng.uniform(-math.pi, math.pi, d), CircuitConfig(n_qubits=n))
        U = circuit_unitary(c)
        np.testing.assert_allclose(U @ U.conj().T, np.eye(1 << n), atol=1e-10)


class TestAdjoint:
    def test_single_rz(self):
        c = Circuit(config=CircuitConfig(n_qubits=1), gates=(Gate(RZ, (0,), 0.7),))
        a = adjoint(c)
        assert a.gates == (Gate(RZ, (0,), -0.7),)

    def test_self_inverse_reversal(self):
        c = Circuit(
            config=CircuitConfig(n_qubits=2),
            gates=(Gate(H, (0,)), Gate(CNOT, (0, 1))),
        )
        a = adjoint(c)
        assert [g.kind for g in a.gates] == [CNOT, H]

    def test_involution(self):
        c = build_feature_map(np.array([0.1, -0.2, 0.3]), CircuitConfig(n_qubits=1))
        assert adjoint(adjoint(c)).gates == c.gates

    def test_uncompute_returns_to_zero(self):
        rng = np.random.default_rng(7)
        c = build_feature_map(rng.uniform(-2, 2, 9), CircuitConfig(n_qubits=3))
        psi = statevector(concat(c, adjoint(c)))
        expect = np.zeros(8, dtype=complex)
        expect[0] = 1.0
        np.testing.assert_allclose(psi, expect, atol=1e-10)


class TestConcat:
    def test_with_empty(self):
        c = build_feature_map(np.ones(3), CircuitConfig(n_qubits=1))
        assert concat(c, empty_circuit(1)).gates == c.gates

    def test_unitarity_of_compute_uncompute(self):
        c = build_feature_map(np.array([0.4, 0.9, -1.2, 0.0, 0.1, 2.0]),
                              CircuitConfig(n_qubits=2))
        amp = statevector(concat(c, adjoint(c)))[0]
        assert abs(amp) == pytest.approx(1.0, abs=1e-12)

    def test_gate_counts_add(self):
        a = build_feature_map(np.ones(6), CircuitConfig(n_qubits=2))
        b = build_feature_map(np.ones(12), CircuitConfig(n_qubits=2))
        assert len(concat(a, b)) == len(a) + len(b)

    def test_qubit_mismatch(self):
        a = build_feature_map(np.ones(3), CircuitConfig(n_qubits=1))
        b = build_feature_map(np.ones(6), CircuitConfig(n_qubits=2))
        with pytest.raises(QubitCountMismatch):
            concat(a, b)


class TestGateInvariants:
    def test_cnot_needs_distinct_wires(self):
        with pytest.raises(QubitCountMismatch):
            Gate(CNOT, (1, 1))

    def test_jsonl_dump_roundtrips(self):
        c = build_feature_map(np.array([0.25, 0.5, 0.75]), CircuitConfig(n_qubits=1))
        lines = dump_jsonl(c).splitlines()
        assert len(lines) == len(c)
        records = [json.loads(l) for l in lines]
        assert records[0] == {"kind": "h", "qubit": 0}
        assert records[1] == {"kind": "rz", "qubit": 0, "angle": 0.25}
        rebuilt_angles = [r["angle"] for r in records if "angle" in r]
        assert rebuilt_angles == [0.25, 0.5, 0.75]

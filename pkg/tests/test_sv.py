import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qksvm import sv
from qksvm.errors import MemoryBudgetExceeded, QubitCapExceeded, SizeMismatch
from qksvm.featuremap import CNOT, H, Circuit, CircuitConfig, Gate, build_feature_map

from oracles import statevector as oracle_state

INV_SQRT2 = 1.0 / math.sqrt(2.0)


def random_feature_circuit(n: int, d: int, seed: int) -> Circuit:
    rng = np.random.default_rng(seed)
    return build_feature_map(rng.uniform(-math.pi, math.pi, d), CircuitConfig(n_qubits=n))


class TestSimulate:
    def test_single_hadamard(self):
        c = Circuit(config=CircuitConfig(n_qubits=1), gates=(Gate(H, (0,)),))
        np.testing.assert_allclose(sv.simulate(c), [INV_SQRT2, INV_SQRT2], atol=1e-15)

    def test_bell_pair(self):
        c = Circuit(
            config=CircuitConfig(n_qubits=2),
            gates=(Gate(H, (0,)), Gate(CNOT, (0, 1))),
        )
        np.testing.assert_allclose(
            sv.simulate(c), [INV_SQRT2, 0.0, 0.0, INV_SQRT2], atol=1e-15
        )

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_kron_oracle(self, seed):
        c = random_feature_circuit(3, 9, seed)
        np.testing.assert_allclose(sv.simulate(c), oracle_state(c), atol=1e-10)

    def test_qubit_cap(self):
        c = random_feature_circuit(4, 4, 0)
        with pytest.raises(QubitCapExceeded):
            sv.simulate(c, qubit_cap=3)

    @given(
        n=st.integers(1, 6),
        d=st.integers(1, 24),
        seed=st.integers(0, 100_000),
    )
    @settings(max_examples=50, deadline=None)
    def test_norm_preserved(self, n, d, seed):
        amps = sv.simulate(random_feature_circuit(n, d, seed))
        assert abs(np.linalg.norm(amps) - 1.0) < 1e-10


class TestNumpyFallback:
    """QKSVM_NUMBA=0 routes gates through the vectorized numpy kernels."""

    @pytest.fixture(autouse=True)
    def restore(self):
        yield
        sv.set_numba(True)

    @pytest.mark.parametrize("seed", range(4))
    def test_paths_agree_bitwise(self, seed):
        c = random_feature_circuit(4, 20, seed)
        sv.set_numba(True)
        with_numba = sv.simulate(c)
        sv.set_numba(False)
        without = sv.simulate(c)
        agree = with_numba.tobytes() == without.tobytes()
        if not agree:  # identical math, but allow for fused-multiply differences
            np.testing.assert_allclose(with_numba, without, atol=1e-14)

    def test_fallback_matches_oracle(self):
        sv.set_numba(False)
        c = random_feature_circuit(3, 12, 11)
        np.testing.assert_allclose(sv.simulate(c), oracle_state(c), atol=1e-10)


class TestInnerProduct:
    def test_self_is_one(self):
        psi = sv.simulate(random_feature_circuit(3, 6, 1))
        ip = sv.inner_product(psi, psi)
        assert ip == pytest.approx(1.0 + 0.0j, abs=1e-10)

    def test_orthogonal_basis_states(self):
        a = np.zeros(4, dtype=complex)
        b = np.zeros(4, dtype=complex)
        a[0] = 1.0
        b[3] = 1.0
        assert sv.inner_product(a, b) == 0.0

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_oracle(self, seed):
        ca = random_feature_circuit(2, 6, seed)
        cb = random_feature_circuit(2, 6, seed + 100)
        got = sv.inner_product(sv.simulate(ca), sv.simulate(cb))
        want = np.vdot(oracle_state(ca), oracle_state(cb))
        assert got == pytest.approx(want, abs=1e-10)

    def test_size_mismatch(self):
        with pytest.raises(SizeMismatch):
            sv.inner_product(np.zeros(2, dtype=complex), np.zeros(4, dtype=complex))

    @given(alpha=st.floats(-math.pi, math.pi), seed=st.integers(0, 1000))
    @settings(max_examples=30, deadline=None)
    def test_global_phase_robustness(self, alpha, seed):
        a = sv.simulate(random_feature_circuit(2, 5, seed))
        b = sv.simulate(random_feature_circuit(2, 5, seed + 1))
        k1 = abs(sv.inner_product(a, b)) ** 2
        k2 = abs(sv.inner_product(a * np.exp(1j * alpha), b)) ** 2
        assert abs(k1 - k2) < 1e-12


class TestTrigCache:
    def test_transparent_bitwise(self):
        c = random_feature_circuit(3, 18, 5)
        with_cache = sv.simulate(c, cache=sv.TrigCache())
        without = sv.simulate(c, cache=None)
        assert with_cache.tobytes() == without.tobytes()

    def test_hit_rate_on_repeated_angles(self):
        cache = sv.TrigCache()
        x = np.full(12, 0.37)  # identical angles everywhere
        c = build_feature_map(x, CircuitConfig(n_qubits=2))
        sv.simulate(c, cache=cache)
        sv.simulate(c, cache=cache)
        assert cache.hits > 0
        assert cache.hit_rate > 0.5
        assert cache.misses >= 1

    def test_exact_bit_keying(self):
        cache = sv.TrigCache()
        cache.terms(0.1)
        cache.terms(0.1 + 1e-18)  # rounds to the same float -> hit
        cache.terms(0.1000000001)  # different bits -> miss
        assert cache.hits == 1
        assert cache.misses == 2


class TestBatchStates:
    def test_empty(self):
        out = sv.batch_states(np.empty((0, 4)), CircuitConfig(n_qubits=2))
        assert out.shape == (0, 4)

    def test_identical_rows_bitwise(self):
        X = np.tile(np.linspace(0, 1, 6), (2, 1))
        out = sv.batch_states(X, CircuitConfig(n_qubits=2))
        assert out[0].tobytes() == out[1].tobytes()

    def test_rows_match_single_simulate(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(-1, 1, (8, 9))
        cfg = CircuitConfig(n_qubits=3)
        out = sv.batch_states(X, cfg)
        for i in rng.choice(8, 5, replace=False):
            single = sv.simulate(build_feature_map(X[i], cfg))
            np.testing.assert_array_equal(out[i], single)

    def test_threads_do_not_change_results(self):
        rng = np.random.default_rng(10)
        X = rng.uniform(-1, 1, (10, 6))
        cfg = CircuitConfig(n_qubits=2)
        serial = sv.batch_states(X, cfg, cache=sv.TrigCache(), threads=1)
        threaded = sv.batch_states(X, cfg, cache=sv.TrigCache(), threads=4)
        assert serial.tobytes() == threaded.tobytes()

    def test_memory_budget(self):
        with pytest.raises(MemoryBudgetExceeded):
            sv.batch_states(
                np.zeros((100, 6)), CircuitConfig(n_qubits=2), memory_budget=1000
            )


class TestSinglePrecision:
    def test_simulate_f32_close_to_f64(self):
        c = random_feature_circuit(4, 24, 3)
        lo = sv.simulate(c, single_precision=True)
        hi = sv.simulate(c)
        assert lo.dtype == np.complex64
        assert abs(np.linalg.norm(lo) - 1.0) < 1e-5
        np.testing.assert_allclose(lo, hi, atol=1e-5)

    def test_batch_f32_halves_memory(self):
        X = np.random.default_rng(0).uniform(-1, 1, (4, 6))
        out = sv.batch_states(X, CircuitConfig(n_qubits=2), single_precision=True)
        assert out.dtype == np.complex64
        full = sv.batch_states(X, CircuitConfig(n_qubits=2))
        np.testing.assert_allclose(out, full, atol=1e-5)

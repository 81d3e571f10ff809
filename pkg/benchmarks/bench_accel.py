"""Benchmark the numba gate kernels against the pure-numpy fallback.

Runs the same simulation and Gram workloads through both paths (the env
flag QKSVM_NUMBA=0 selects the fallback globally; here we flip it
in-process) and prints a comparison table.

Usage: python benchmarks/bench_accel.py [--qubits 16] [--rows 64] [--features 784]
"""

import argparse
import time

import numpy as np

from qksvm import sv
from qksvm.featuremap import CircuitConfig, build_feature_map
from qksvm.kernel import gram_train


def time_workload(rows: int, features: int, cfg: CircuitConfig) -> dict:
    rng = np.random.default_rng(0)
    X = rng.uniform(0.0, 0.25, (rows, features))

    c = build_feature_map(X[0], cfg)
    t0 = time.perf_counter()
    sv.simulate(c)
    first = time.perf_counter() - t0

    t0 = time.perf_counter()
    for i in range(min(rows, 16)):
        sv.simulate(build_feature_map(X[i], cfg))
    per_circuit = (time.perf_counter() - t0) / min(rows, 16)

    t0 = time.perf_counter()
    g = gram_train(X, cfg)
    gram_s = time.perf_counter() - t0
    return {
        "first_simulate_s": first,
        "per_circuit_ms": per_circuit * 1e3,
        "gram_s": gram_s,
        "gram_checksum": float(g.values.sum()),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--qubits", type=int, default=16)
    ap.add_argument("--rows", type=int, default=64)
    ap.add_argument("--features", type=int, default=784)
    args = ap.parse_args()

    cfg = CircuitConfig(n_qubits=args.qubits)
    results = {}
    for label, enabled in (("numba", True), ("numpy", False)):
        active = sv.set_numba(enabled)
        if enabled and not active:
            print("numba not available; skipping the jit row")
            continue
        results[label] = time_workload(args.rows, args.features, cfg)
    sv.set_numba(True)

    print(f"\n{args.rows} circuits, {args.qubits} qubits, {args.features} features")
    print(f"{'path':<8} {'first sim':>10} {'per circuit':>12} {'gram':>10}")
    for label, r in results.items():
        print(
            f"{label:<8} {r['first_simulate_s']:>9.3f}s {r['per_circuit_ms']:>10.2f}ms "
            f"{r['gram_s']:>9.2f}s"
        )
    if len(results) == 2:
        a, b = results["numba"], results["numpy"]
        if abs(a["gram_checksum"] - b["gram_checksum"]) > 1e-9:
            raise SystemExit("paths disagree on the Gram checksum")
        print(
            f"\nspeedup: {b['per_circuit_ms'] / a['per_circuit_ms']:.1f}x per circuit, "
            f"{b['gram_s'] / a['gram_s']:.1f}x on the gram workload"
        )


if __name__ == "__main__":
    main()

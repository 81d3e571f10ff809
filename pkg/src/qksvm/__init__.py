"""Quantum-kernel SVM engine.

End-to-end hybrid pipeline on commodity hardware: class-balanced k-means
distillation, PCA + angle scaling, fidelity-kernel Gram matrices from
simulated data re-uploading circuits (dense statevector or tensor-network
contraction), one-vs-one SMO training, and quantum-vs-classical
benchmarking with stratified cross-validation.
"""

__version__ = "0.1.0"

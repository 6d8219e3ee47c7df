"""
Training a classifier and exporting it
======================================

Train the hardware-efficient classifier on Iris for a few epochs, then move
it through every export format and measure how much the predictions change.
"""

from qnnbridge import QuantumLayer, TrainConfig, load_iris, train
from qnnbridge.export import DIALECTS, export_dialect, export_qasm, roundtrip_fidelity

data = load_iris(seed=0)
layer = QuantumLayer.classifier(n_qubits=4, layers=2, n_classes=3)
result = train(layer, data, TrainConfig(epochs=20, seed=0))
for h in result.history[::5]:
    print(f"epoch {h.epoch:3d} loss {h.loss:.4f} train acc {h.accuracy:.3f}")
print(f"test accuracy {result.test_accuracy:.3f}")

##############################################################################
# Dialect documents
# -----------------
# Each dialect keeps the symbols and ships the parameter table alongside.

bundle = result.bundle
print(export_dialect(bundle.circuit, "cirq", bundle.parameters)[:300], "...")

##############################################################################
# Round trips
# -----------
# Full-precision floats give identical probabilities. Rounding angles to
# three decimals is enough to break the 1e-4 per-sample bound.

xs = data.x_test
for via in ["canonical", *DIALECTS]:
    rt = roundtrip_fidelity(bundle, via, xs)
    print(f"{via:>10}: F_RT={rt.fidelity:.10f} max L1={rt.max_l1:.1e}")
rt = roundtrip_fidelity(bundle, "qiskit", xs, decimals=3)
print(f"qiskit, 3 decimals: F_RT={rt.fidelity:.6f} max L1={rt.max_l1:.1e}")

##############################################################################
# QASM needs bound angles

print(export_qasm(bundle.circuit.bind(bundle.parameters.values)).splitlines()[:6])

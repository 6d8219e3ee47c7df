"""Variational classifier: ansatz construction and the forward pass."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .circuit import CircuitDag, GateKind, GateOp, Observable, Symbol, z_on
from .encoders import EncodingConfig
from .simulator import evolve_batch, expectation_batch

G = GateKind


def hardware_efficient_ansatz(n_qubits: int, layers: int) -> CircuitDag:
    """Per layer: Ry then Rz on every qubit, then a ring of CNOTs.

    Layer l uses symbols 2nl..2nl+n-1 for Ry and 2nl+n..2nl+2n-1 for Rz.
    """
    if n_qubits < 2:
        raise ValueError(f"the ansatz needs at least 2 qubits, got {n_qubits}")
    if layers < 1:
        raise ValueError(f"the ansatz needs at least 1 layer, got {layers}")
    ops = []
    for layer in range(layers):
        base = 2 * n_qubits * layer
        ops += [GateOp(G.RY, (j,), Symbol(base + j)) for j in range(n_qubits)]
        ops += [GateOp(G.RZ, (j,), Symbol(base + n_qubits + j)) for j in range(n_qubits)]
        ops += [GateOp(G.CNOT, (j, (j + 1) % n_qubits)) for j in range(n_qubits)]
    return CircuitDag(n_qubits, tuple(ops), f"hea_{n_qubits}x{layers}")


def class_observables(n_qubits: int, n_classes: int) -> tuple[Observable, ...]:
    """Logit k is <Z_k>; needs at least as many qubits as classes."""
    if n_classes > n_qubits:
        raise ValueError(f"{n_classes} classes need at least {n_classes} qubits, have {n_qubits}")
    return tuple(z_on(k, n_qubits) for k in range(n_classes))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def logits(circuit: CircuitDag, values, encoding: EncodingConfig,
           observables: Sequence[Observable], xs=None, states=None) -> np.ndarray:
    """(B, C) expectation values for encoded inputs ``xs`` (or ready ``states``)."""
    if states is None:
        states = encoding.states(xs)
    final = evolve_batch(circuit.bind(values), states)
    return np.stack([expectation_batch(final, obs) for obs in observables], axis=1)


def predict_proba(circuit, values, encoding, observables, xs) -> np.ndarray:
    return softmax(logits(circuit, values, encoding, observables, xs))

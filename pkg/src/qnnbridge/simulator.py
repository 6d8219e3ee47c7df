"""Dense statevector simulation, sampling and a Pauli-trajectory noise model."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import (BasisProjector, CircuitDag, CircuitError, GateKind, GateOp,
                      Observable, PauliSum)

MAX_STATEVECTOR_QUBITS = 22
MAX_UNITARY_QUBITS = 10

_SQ2 = 1 / np.sqrt(2)
_FIXED = {
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    GateKind.S: np.diag([1, 1j]).astype(complex),
    GateKind.T: np.diag([1, np.exp(1j * np.pi / 4)]),
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.SX: 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]),
    # two-qubit matrices use local index b(q0) + 2 * b(q1)
    GateKind.CNOT: np.eye(4, dtype=complex)[[0, 3, 2, 1]],
    GateKind.CZ: np.diag([1, 1, 1, -1]).astype(complex),
    GateKind.SWAP: np.eye(4, dtype=complex)[[0, 2, 1, 3]],
}
PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]).astype(complex),
}
# generator of each rotation, acting on the op's qubits
GENERATORS = {
    GateKind.RX: PAULI["X"],
    GateKind.RY: PAULI["Y"],
    GateKind.RZ: PAULI["Z"],
    GateKind.RZZ: np.kron(PAULI["Z"], PAULI["Z"]),
    GateKind.RXX: np.kron(PAULI["X"], PAULI["X"]),
}


def rotation(kind: GateKind, theta: float) -> np.ndarray:
    g = GENERATORS[kind]
    return np.cos(theta / 2) * np.eye(len(g)) - 1j * np.sin(theta / 2) * g


def gate_matrix(op: GateOp) -> np.ndarray:
    """Matrix of a bound op on its own qubits (little-endian local index)."""
    kind = op.kind
    if kind in GENERATORS:
        return rotation(kind, op.angle)
    if kind is GateKind.GPHASE:
        return np.array([[np.exp(1j * op.angle)]])
    return _FIXED[kind]


# --- kernels -----------------------------------------------------------------
# States are held as (batch, 2, ..., 2); qubit q lives on axis 1 + (n - 1 - q).

def _axes(qubits, n):
    return [1 + n - 1 - q for q in qubits]


def apply_matrix(state: np.ndarray, mat: np.ndarray, qubits, n: int) -> np.ndarray:
    """Apply ``mat`` to ``qubits`` of a batched tensor-shaped state."""
    k = len(qubits)
    if k == 0:
        return state * mat[0, 0]
    if k == 1:
        ax = _axes(qubits, n)[0]
        out = np.tensordot(state, mat, axes=([ax], [1]))
        return np.moveaxis(out, -1, ax)
    # reversed so tensor axes read (high, low) like the reshaped matrix
    axes = _axes(qubits[::-1], n)
    m = mat.reshape(2, 2, 2, 2)
    out = np.tensordot(state, m, axes=(axes, [2, 3]))
    return np.moveaxis(out, [-2, -1], axes)


def _as_tensor(vecs: np.ndarray, n: int) -> np.ndarray:
    return vecs.reshape((-1,) + (2,) * n)


def _as_flat(tensor: np.ndarray) -> np.ndarray:
    return tensor.reshape(tensor.shape[0], -1)


def run_ops(tensor: np.ndarray, ops, n: int) -> np.ndarray:
    for op in ops:
        tensor = apply_matrix(tensor, gate_matrix(op), op.qubits, n)
    return tensor


def _require_bound(circuit: CircuitDag):
    for op in circuit.ops:
        if op.is_symbolic:
            raise CircuitError(f"unbound parameter on {op.kind.value}{op.qubits}; bind first")


def zero_state(n_qubits: int, batch: int = 1) -> np.ndarray:
    psi = np.zeros((batch, 2 ** n_qubits), dtype=complex)
    psi[:, 0] = 1
    return psi


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    n_qubits: int

    def __array__(self, dtype=None, copy=None):
        return self.amplitudes if dtype is None else self.amplitudes.astype(dtype)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def evolve(circuit: CircuitDag, initial: np.ndarray | StateVector | None = None) -> StateVector:
    """U(circuit)|0...0>, or U(circuit)|initial> when a start state is given."""
    _require_bound(circuit)
    n = circuit.n_qubits
    if n > MAX_STATEVECTOR_QUBITS:
        raise CircuitError(f"{n} qubits exceeds the statevector limit of {MAX_STATEVECTOR_QUBITS}")
    psi = zero_state(n) if initial is None else np.asarray(initial, dtype=complex).reshape(1, -1)
    if psi.shape[1] != 2 ** n:
        raise CircuitError("initial state dimension does not match circuit")
    out = _as_flat(run_ops(_as_tensor(psi, n), circuit.ops, n))[0]
    return StateVector(out, n)


def evolve_batch(circuit: CircuitDag, states: np.ndarray) -> np.ndarray:
    """Apply a bound circuit to each row of ``states`` (shape ``(B, 2**n)``)."""
    _require_bound(circuit)
    n = circuit.n_qubits
    return _as_flat(run_ops(_as_tensor(np.asarray(states, dtype=complex), n), circuit.ops, n))


def unitary_of(circuit: CircuitDag) -> np.ndarray:
    """Full unitary; column i is the circuit applied to basis state |i>."""
    _require_bound(circuit)
    n = circuit.n_qubits
    if n > MAX_UNITARY_QUBITS:
        raise CircuitError(f"unitary construction limited to {MAX_UNITARY_QUBITS} qubits, got {n}")
    basis = np.eye(2 ** n, dtype=complex)
    return evolve_batch(circuit, basis).T


# --- observables -------------------------------------------------------------

def apply_pauli_string(states: np.ndarray, label: str, n: int) -> np.ndarray:
    """P|psi> for each row of a flat batch."""
    t = _as_tensor(states, n)
    for q, ch in enumerate(label):
        if ch != "I":
            t = apply_matrix(t, PAULI[ch], (q,), n)
    return _as_flat(t)


def z_signs(n: int) -> np.ndarray:
    """Row q holds the eigenvalue of Z_q on each basis index."""
    idx = np.arange(2 ** n)
    return 1 - 2 * ((idx[None, :] >> np.arange(n)[:, None]) & 1)


def apply_observable(states: np.ndarray, obs: Observable, n: int) -> np.ndarray:
    _check_obs(obs, n)
    if isinstance(obs, BasisProjector):
        out = np.zeros_like(states)
        out[:, obs.index] = states[:, obs.index]
        return out
    out = np.zeros_like(states)
    for c, label in obs.terms:
        out += c * apply_pauli_string(states, label, n)
    return out


def _check_obs(obs: Observable, n: int):
    if obs.n_qubits != n:
        raise CircuitError(f"observable on {obs.n_qubits} qubits, state has {n}")


def expectation(state: StateVector | np.ndarray, obs: Observable) -> float:
    psi = np.asarray(state, dtype=complex).reshape(1, -1)
    n = int(np.log2(psi.shape[1]))
    if 2 ** n != psi.shape[1]:
        raise CircuitError("state dimension is not a power of two")
    return float(expectation_batch(psi, obs)[0])


def expectation_batch(states: np.ndarray, obs: Observable) -> np.ndarray:
    n = int(np.log2(states.shape[1]))
    _check_obs(obs, n)
    if isinstance(obs, BasisProjector):
        return np.abs(states[:, obs.index]) ** 2
    if all(set(label) <= {"I", "Z"} for _, label in obs.terms):
        probs = np.abs(states) ** 2
        signs = z_signs(n)
        diag = np.zeros(2 ** n)
        for c, label in obs.terms:
            d = np.ones(2 ** n)
            for q, ch in enumerate(label):
                if ch == "Z":
                    d = d * signs[q]
            diag += c * d
        return (probs * diag).sum(axis=1)  # row-wise, so results do not depend on batch size
    lam = apply_observable(states, obs, n)
    return np.real(np.einsum("bi,bi->b", states.conj(), lam))


# --- sampling and noise ------------------------------------------------------

@dataclass(frozen=True)
class NoiseModel:
    eps_1q: float = 0.0
    eps_2q: float = 0.0
    eps_ro: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        for name in ("eps_1q", "eps_2q", "eps_ro"):
            v = getattr(self, name)
            if not 0.0 <= v <= 0.5:
                raise ValueError(f"{name} must lie in [0, 0.5], got {v}")

    @property
    def gate_free(self) -> bool:
        return self.eps_1q == 0 and self.eps_2q == 0


@dataclass(frozen=True)
class ShotCounts:
    """Outcome histogram; keys are bitstrings written qubit 0 first."""

    counts: dict[str, int] = field(default_factory=dict)
    shots: int = 0

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to the number of shots")

    def frequency(self, bits: str) -> float:
        return self.counts.get(bits, 0) / self.shots


def _bitstring(index: int, n: int) -> str:
    return "".join(str((index >> j) & 1) for j in range(n))


def _draw(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One outcome per row of a (K, D) probability array."""
    cum = np.cumsum(probs, axis=1)
    cum /= cum[:, -1:]
    u = rng.random(probs.shape[0])
    return np.minimum((cum < u[:, None]).sum(axis=1), probs.shape[1] - 1)


def _readout_flip(outcomes: np.ndarray, n: int, eps: float, rng) -> np.ndarray:
    if eps <= 0:
        return outcomes
    flips = rng.random((outcomes.size, n)) < eps
    masks = (flips * (1 << np.arange(n))).sum(axis=1)
    return outcomes ^ masks


def sample(state: StateVector | np.ndarray, shots: int, noise: NoiseModel | None = None,
           seed: int | None = None) -> ShotCounts:
    """Draw ``shots`` i.i.d. outcomes; readout bits flip independently with ``eps_ro``."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    psi = np.asarray(state, dtype=complex).reshape(-1)
    n = int(np.log2(psi.size))
    if seed is None and noise is not None:
        seed = noise.seed
    rng = np.random.default_rng(seed)
    probs = np.abs(psi) ** 2
    outcomes = rng.choice(psi.size, size=shots, p=probs / probs.sum())
    if noise is not None:
        outcomes = _readout_flip(outcomes, n, noise.eps_ro, rng)
    values, freq = np.unique(outcomes, return_counts=True)
    return ShotCounts({_bitstring(int(v), n): int(c) for v, c in zip(values, freq)}, shots)


_PAULI_1Q = ("X", "Y", "Z")
_PAULI_2Q = tuple(a + b for a in "IXYZ" for b in "IXYZ")[1:]


def _trajectories(circuit: CircuitDag, noise: NoiseModel, count: int, rng) -> np.ndarray:
    """Evolve ``count`` trajectories with stochastic depolarizing Pauli insertion."""
    n = circuit.n_qubits
    t = _as_tensor(zero_state(n, count), n)
    for op in circuit.ops:
        t = apply_matrix(t, gate_matrix(op), op.qubits, n)
        k = len(op.qubits)
        p = noise.eps_1q if k == 1 else noise.eps_2q if k == 2 else 0.0
        if p <= 0:
            continue
        hit = np.flatnonzero(rng.random(count) < p)
        if hit.size == 0:
            continue
        paulis = _PAULI_1Q if k == 1 else _PAULI_2Q
        which = rng.integers(len(paulis), size=hit.size)
        for i, label in enumerate(paulis):
            rows = hit[which == i]
            if rows.size == 0:
                continue
            sub = t[rows]
            for q, ch in zip(op.qubits, label):
                if ch != "I":
                    sub = apply_matrix(sub, PAULI[ch], (q,), n)
            t[rows] = sub
    return _as_flat(t)


_SDG_H = _FIXED[GateKind.H] @ np.diag([1, -1j])


def _rotate_to_z(states: np.ndarray, label: str, n: int) -> np.ndarray:
    t = _as_tensor(states, n)
    for q, ch in enumerate(label):
        if ch == "X":
            t = apply_matrix(t, _FIXED[GateKind.H], (q,), n)
        elif ch == "Y":
            t = apply_matrix(t, _SDG_H, (q,), n)
    return _as_flat(t)


def _readout_probabilities(probs: np.ndarray, n: int, eps: float) -> np.ndarray:
    """Outcome distribution after independent bit flips (rows are distributions)."""
    if eps <= 0:
        return probs
    confusion = np.array([[1 - eps, eps], [eps, 1 - eps]])
    t = probs.reshape((-1,) + (2,) * n)
    for q in range(n):
        ax = 1 + n - 1 - q
        t = np.moveaxis(np.tensordot(t, confusion, axes=([ax], [1])), -1, ax)
    return t.reshape(probs.shape)


def _term_values(label: str, n: int) -> np.ndarray:
    signs = z_signs(n)
    d = np.ones(2 ** n)
    for q, ch in enumerate(label):
        if ch != "I":
            d = d * signs[q]
    return d


def noisy_expectation(circuit: CircuitDag, obs: Observable, noise: NoiseModel | None,
                      shots: int | None, seed: int | None = None,
                      trajectories: int = 1024) -> float:
    """Monte-Carlo expectation under depolarizing gate noise, readout flips and shot noise.

    With ``shots`` set, every term of ``obs`` is estimated from ``shots`` single-shot
    trajectories measured in the term's eigenbasis. With ``shots=None`` the estimate
    is exact for gate-free noise and a trajectory average otherwise.
    """
    _require_bound(circuit)
    noise = noise or NoiseModel()
    n = circuit.n_qubits
    _check_obs(obs, n)
    rng = np.random.default_rng(noise.seed if seed is None else seed)

    def measured(label):
        """Outcome indices (shots mode) or outcome distributions (exact mode)."""
        if noise.gate_free:
            psi = evolve(circuit).amplitudes[None, :]
        else:
            psi = _trajectories(circuit, noise, shots or trajectories, rng)
        psi = _rotate_to_z(psi, label, n)
        probs = np.abs(psi) ** 2
        if shots is None:
            return _readout_probabilities(probs, n, noise.eps_ro)
        if noise.gate_free:
            drawn = rng.choice(probs.shape[1], size=shots, p=probs[0] / probs[0].sum())
        else:
            drawn = _draw(probs, rng)
        return _readout_flip(drawn, n, noise.eps_ro, rng)

    if isinstance(obs, BasisProjector):
        out = measured("I" * n)
        if shots is None:
            return float(out[:, obs.index].mean())
        return float(np.mean(out == obs.index))

    total = 0.0
    for c, label in obs.terms:
        if set(label) == {"I"}:
            total += c
            continue
        out = measured(label)
        values = _term_values(label, n)
        if shots is None:
            total += c * float((out @ values).mean())
        else:
            total += c * float(values[out].mean())
    return total


def noisy_sample(circuit: CircuitDag, shots: int, noise: NoiseModel | None = None,
                 seed: int | None = None) -> ShotCounts:
    """Computational-basis counts with one noisy trajectory per shot."""
    noise = noise or NoiseModel()
    if noise.gate_free:
        return sample(evolve(circuit), shots, noise, seed)
    if shots < 1:
        raise ValueError("shots must be >= 1")
    n = circuit.n_qubits
    rng = np.random.default_rng(noise.seed if seed is None else seed)
    psi = _trajectories(circuit, noise, shots, rng)
    outcomes = _readout_flip(_draw(np.abs(psi) ** 2, rng), n, noise.eps_ro, rng)
    values, freq = np.unique(outcomes, return_counts=True)
    return ShotCounts({_bitstring(int(v), n): int(c) for v, c in zip(values, freq)}, shots)

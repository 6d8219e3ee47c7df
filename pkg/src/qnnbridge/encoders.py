"""Classical-to-quantum data encoders.

Every encoder returns a bound :class:`CircuitDag`. ``EncodingConfig.states``
gives the same states in closed form for a whole batch, which is what the
training loop uses.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import CircuitDag, CircuitError, GateKind, GateOp
from .simulator import evolve
from .transpiler import TargetProfile, optimize, transpile, verify

G = GateKind


class EncodingError(CircuitError):
    pass


def _features(x, name="x") -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size == 0:
        raise EncodingError(f"{name} is empty")
    if not np.all(np.isfinite(x)):
        raise EncodingError(f"{name} has non-finite entries")
    return x


# --- amplitude --------------------------------------------------------------

def amplitude_qubits(dim: int) -> int:
    return max(1, int(np.ceil(np.log2(dim))))


def truncate_amplitudes(x, epsilon: float = 0.0) -> np.ndarray:
    """Zero-padded, normalized ``x`` with the smallest entries dropped.

    Entries are removed smallest first while the distance between the original
    and the renormalized vector, ``sqrt(2 - 2 sqrt(1 - m))`` for removed mass
    ``m``, stays within ``epsilon``.
    """
    x = _features(x)
    if not 0 <= epsilon < 1:
        raise EncodingError(f"epsilon must lie in [0, 1), got {epsilon}")
    norm = np.linalg.norm(x)
    if norm == 0:
        raise EncodingError("amplitude encoding needs a non-zero vector")
    n = amplitude_qubits(x.size)
    v = np.zeros(2 ** n)
    v[: x.size] = x / norm
    if epsilon > 0:
        order = np.argsort(np.abs(v), kind="stable")
        removed = np.cumsum(v[order] ** 2)
        dist = np.sqrt(np.maximum(0.0, 2 - 2 * np.sqrt(np.clip(1 - removed, 0, 1))))
        k = int(np.searchsorted(dist > epsilon, True))
        k = min(k, v.size - 1)
        v[order[:k]] = 0.0
        v /= np.linalg.norm(v)
    return v


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def _multiplexed_ry(alphas: np.ndarray, target: int, controls: Sequence[int]) -> list[GateOp]:
    """Uniformly controlled Ry: angle ``alphas[c]`` when the controls read ``c``.

    Bit m of ``c`` is the value of ``controls[m]``.
    """
    k = len(controls)
    if k == 0:
        return [GateOp(G.RY, (target,), float(alphas[0]))]
    size = 2 ** k
    c = np.arange(size)
    gray = np.array([_gray(i) for i in range(size)])
    parity = np.array([[bin(ci & gi).count("1") & 1 for gi in gray] for ci in c])
    m = 1 - 2 * parity
    thetas = m.T @ alphas / size
    ops = []
    for i in range(size):
        ops.append(GateOp(G.RY, (target,), float(thetas[i])))
        flip = int(gray[i] ^ gray[(i + 1) % size])
        ops.append(GateOp(G.CNOT, (controls[flip.bit_length() - 1], target)))
    return ops


def amplitude_encode(x, epsilon: float = 0.0) -> CircuitDag:
    """Real amplitudes ``x / |x|`` (after padding and truncation) from |0...0>."""
    v = truncate_amplitudes(x, epsilon)
    n = amplitude_qubits(v.size)
    ops: list[GateOp] = []
    for t in range(n - 1, -1, -1):
        blocks = v.reshape(-1, 2 ** (t + 1))  # row c: amplitudes whose high bits read c
        lo, hi = blocks[:, : 2 ** t], blocks[:, 2 ** t:]
        if t == 0:
            alphas = 2 * np.arctan2(hi[:, 0], lo[:, 0])
        else:
            alphas = 2 * np.arctan2(np.linalg.norm(hi, axis=1), np.linalg.norm(lo, axis=1))
        ops.extend(_multiplexed_ry(alphas, t, list(range(t + 1, n))))
    ops = [op for op in ops if op.kind is not G.RY or abs(op.angle) > 1e-15]
    return optimize(CircuitDag(n, tuple(ops), "amplitude"))


# --- angle ----------------------------------------------------------------------

_AXIS = {"x": G.RX, "y": G.RY, "z": G.RZ}


def angle_encode(x, axis: str = "y") -> CircuitDag:
    x = _features(x)
    kind = _AXIS.get(str(axis).lower())
    if kind is None:
        raise EncodingError(f"axis must be one of X, Y, Z, got {axis!r}")
    ops = [GateOp(kind, (j,), float(v)) for j, v in enumerate(x)]
    return CircuitDag(x.size, tuple(ops), "angle")


def dense_angle_encode(x) -> CircuitDag:
    x = _features(x)
    if x.size % 2:
        raise EncodingError(f"dense angle encoding needs an even number of features, got {x.size}")
    ops = []
    for j in range(x.size // 2):
        ops.append(GateOp(G.RY, (j,), float(x[2 * j])))
        ops.append(GateOp(G.RZ, (j,), float(x[2 * j + 1])))
    return CircuitDag(x.size // 2, tuple(ops), "dense_angle")


# --- IQP -------------------------------------------------------------------------

def ring_pairs(n: int) -> list[tuple[int, int]]:
    if n < 2:
        return []
    if n == 2:
        return [(0, 1)]
    return [(j, (j + 1) % n) for j in range(n)]


def _check_pairs(pairs, n) -> list[tuple[int, int]]:
    out, seen = [], set()
    for p in pairs:
        a, b = (int(q) for q in p)
        if not (0 <= a < n and 0 <= b < n) or a == b:
            raise EncodingError(f"entanglement pair {(a, b)} invalid for {n} qubits")
        key = frozenset((a, b))
        if key in seen:
            raise EncodingError(f"duplicate entanglement pair {(a, b)}")
        seen.add(key)
        out.append((a, b))
    return out


def iqp_encode(x, pairs=None, repetitions: int = 1) -> CircuitDag:
    """``repetitions`` blocks of H, Rz(-2 x_j), then Rzz(-2 x_j x_k) and CZ per pair."""
    x = _features(x)
    n = x.size
    if repetitions < 1:
        raise EncodingError(f"repetitions must be >= 1, got {repetitions}")
    pairs = ring_pairs(n) if pairs is None else _check_pairs(pairs, n)
    block = [GateOp(G.H, (j,)) for j in range(n)]
    block += [GateOp(G.RZ, (j,), float(-2 * x[j])) for j in range(n)]
    for a, b in pairs:
        block.append(GateOp(G.RZZ, (a, b), float(-2 * x[a] * x[b])))
        block.append(GateOp(G.CZ, (a, b)))
    return CircuitDag(n, tuple(block) * repetitions, "iqp")


# --- configuration ------------------------------------------------------------------

KINDS = ("amplitude", "angle", "dense_angle", "iqp")


@dataclass(frozen=True)
class EncodingConfig:
    kind: str = "angle"
    axis: str = "y"
    repetitions: int = 1
    pairs: tuple[tuple[int, int], ...] | None = None
    epsilon: float = 0.0

    def __post_init__(self):
        kind = str(self.kind).lower().replace("-", "_")
        if kind == "denseangle":
            kind = "dense_angle"
        if kind not in KINDS:
            raise EncodingError(f"unknown encoding {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "axis", str(self.axis).lower())
        if self.axis not in _AXIS:
            raise EncodingError(f"axis must be one of X, Y, Z, got {self.axis!r}")
        if self.repetitions < 1:
            raise EncodingError("repetitions must be >= 1")
        if not 0 <= self.epsilon < 1:
            raise EncodingError("epsilon must lie in [0, 1)")
        if self.pairs is not None:
            object.__setattr__(self, "pairs", tuple(tuple(int(q) for q in p) for p in self.pairs))

    def n_qubits(self, n_features: int) -> int:
        if self.kind == "amplitude":
            return amplitude_qubits(n_features)
        if self.kind == "dense_angle":
            return n_features // 2
        return n_features

    def circuit(self, x) -> CircuitDag:
        if self.kind == "amplitude":
            return amplitude_encode(x, self.epsilon)
        if self.kind == "angle":
            return angle_encode(x, self.axis)
        if self.kind == "dense_angle":
            return dense_angle_encode(x)
        return iqp_encode(x, self.pairs, self.repetitions)

    def states(self, xs) -> np.ndarray:
        """Encoded statevectors for each row of ``xs``, shape (B, 2**n)."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if self.kind == "amplitude":
            return np.stack([truncate_amplitudes(x, self.epsilon) for x in xs]).astype(complex)
        if self.kind in ("angle", "dense_angle"):
            if self.kind == "dense_angle" and xs.shape[1] % 2:
                raise EncodingError("dense angle encoding needs an even number of features")
            return np.stack([_product_state(self._qubit_states(x)) for x in xs])
        return np.stack([evolve(self.circuit(x)).amplitudes for x in xs])

    def _qubit_states(self, x) -> list[np.ndarray]:
        if self.kind == "dense_angle":
            a, b = x[0::2], x[1::2]
            return [np.array([np.exp(-0.5j * bj) * np.cos(aj / 2), np.exp(0.5j * bj) * np.sin(aj / 2)])
                    for aj, bj in zip(a, b)]
        c, s = np.cos(x / 2), np.sin(x / 2)
        if self.axis == "y":
            return [np.array([cj, sj], dtype=complex) for cj, sj in zip(c, s)]
        if self.axis == "x":
            return [np.array([cj, -1j * sj]) for cj, sj in zip(c, s)]
        return [np.array([np.exp(-0.5j * xj), 0]) for xj in x]

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "angle":
            out["axis"] = self.axis.upper()
        if self.kind == "iqp":
            out["repetitions"] = self.repetitions
            out["pairs"] = None if self.pairs is None else [list(p) for p in self.pairs]
        if self.kind == "amplitude":
            out["epsilon"] = self.epsilon
        return out

    @classmethod
    def from_dict(cls, d: dict) -> EncodingConfig:
        pairs = d.get("pairs")
        return cls(d["kind"], d.get("axis", "y"), int(d.get("repetitions", 1)),
                   None if pairs is None else tuple(tuple(p) for p in pairs),
                   float(d.get("epsilon", 0.0)))


def _product_state(qubit_states: list[np.ndarray]) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for v in qubit_states:  # qubit j is bit j, so later qubits go on the left
        out = np.kron(v, out)
    return out


def encode(config: EncodingConfig, x) -> CircuitDag:
    return config.circuit(x)


@dataclass(frozen=True)
class EquivalenceResult:
    passed: bool
    residual: float


def verify_encoding_equivalence(config: EncodingConfig, x, target: TargetProfile,
                                delta: float = 1e-8) -> EquivalenceResult:
    """Compile the encoding for ``target`` and compare unitaries up to phase."""
    circuit = config.circuit(x)
    compiled = transpile(circuit, target, verify_flag=False)
    residual = verify(circuit, compiled).residual
    return EquivalenceResult(residual < delta, residual)


__all__ = [
    "EncodingConfig", "EncodingError", "EquivalenceResult", "amplitude_encode", "angle_encode",
    "dense_angle_encode", "iqp_encode", "truncate_amplitudes", "ring_pairs", "encode",
    "verify_encoding_equivalence", "amplitude_qubits",
]

"""Vendor-independent circuit representation.

A circuit is a totally ordered list of gate operations; the DAG view is
derived from it (two ops commute in scheduling iff they touch disjoint
qubits). Rotation gates follow ``R_G(theta) = exp(-i theta G / 2)``.

Qubit ``j`` is bit ``j`` of a basis-state index (little-endian). Pauli
strings and bitstrings are written qubit 0 first.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence, Union

import numpy as np


class CircuitError(ValueError):
    """Raised for malformed circuits, ops or parameter bindings."""


class GateKind(str, Enum):
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    CNOT = "cnot"
    CZ = "cz"
    H = "h"
    S = "s"
    T = "t"
    # internal extensions used by the transpiler and the IQP encoder
    X = "x"
    SX = "sx"
    SWAP = "swap"
    RZZ = "rzz"
    RXX = "rxx"
    GPHASE = "gphase"

    @property
    def n_qubits(self) -> int:
        if self in _TWO_QUBIT:
            return 2
        if self is GateKind.GPHASE:
            return 0
        return 1

    @property
    def parametric(self) -> bool:
        return self in ROTATIONS or self is GateKind.GPHASE


CORE_GATES = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.CNOT,
                        GateKind.CZ, GateKind.H, GateKind.S, GateKind.T})
ROTATIONS = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.RZZ, GateKind.RXX})
_TWO_QUBIT = frozenset({GateKind.CNOT, GateKind.CZ, GateKind.SWAP, GateKind.RZZ, GateKind.RXX})


@dataclass(frozen=True)
class Bound:
    value: float


@dataclass(frozen=True)
class Symbol:
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise CircuitError(f"symbol index must be non-negative, got {self.index}")


ParamRef = Union[Bound, Symbol]


@dataclass(frozen=True)
class GateOp:
    kind: GateKind
    qubits: tuple[int, ...]
    param: ParamRef | None = None

    def __post_init__(self):
        kind = GateKind(self.kind)
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", qubits)
        if len(qubits) != kind.n_qubits:
            raise CircuitError(f"{kind.value} acts on {kind.n_qubits} qubit(s), got {len(qubits)}")
        if len(set(qubits)) != len(qubits):
            raise CircuitError(f"{kind.value} on duplicate qubits {qubits}")
        if any(q < 0 for q in qubits):
            raise CircuitError(f"negative qubit index in {qubits}")
        param = self.param
        if isinstance(param, (int, float, np.floating, np.integer)) and not isinstance(param, bool):
            param = Bound(float(param))
            object.__setattr__(self, "param", param)
        if kind.parametric and param is None:
            raise CircuitError(f"{kind.value} requires a parameter")
        if not kind.parametric and param is not None:
            raise CircuitError(f"{kind.value} takes no parameter")
        if kind is GateKind.GPHASE and isinstance(param, Symbol):
            raise CircuitError("global phase cannot be symbolic")

    @property
    def is_symbolic(self) -> bool:
        return isinstance(self.param, Symbol)

    @property
    def angle(self) -> float:
        if not isinstance(self.param, Bound):
            raise CircuitError(f"{self.kind.value} on {self.qubits} has an unbound parameter")
        return self.param.value


def gate(kind: GateKind | str, *qubits: int, param: ParamRef | float | None = None) -> GateOp:
    """Shorthand constructor: ``gate("cnot", 0, 1)``, ``gate("ry", 0, param=Symbol(2))``."""
    return GateOp(GateKind(kind), tuple(qubits), param)


@dataclass(frozen=True)
class CircuitDag:
    n_qubits: int
    ops: tuple[GateOp, ...] = ()
    name: str = ""

    def __post_init__(self):
        if self.n_qubits < 1:
            raise CircuitError(f"n_qubits must be positive, got {self.n_qubits}")
        ops = tuple(self.ops)
        object.__setattr__(self, "ops", ops)
        for op in ops:
            _check_bounds(op, self.n_qubits)

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def __add__(self, other: CircuitDag) -> CircuitDag:
        return compose(self, other)

    def append(self, op: GateOp) -> CircuitDag:
        return append(self, op)

    def extend(self, ops: Iterable[GateOp]) -> CircuitDag:
        ops = tuple(ops)
        for op in ops:
            _check_bounds(op, self.n_qubits)
        return replace(self, ops=self.ops + ops)

    def bind(self, store: ParameterStore | Sequence[float]) -> CircuitDag:
        return bind(self, store)

    @property
    def symbols(self) -> list[int]:
        """Sorted distinct symbol indices used by the circuit."""
        return sorted({op.param.index for op in self.ops if op.is_symbolic})

    @property
    def is_bound(self) -> bool:
        return not any(op.is_symbolic for op in self.ops)


def _check_bounds(op: GateOp, n_qubits: int):
    for q in op.qubits:
        if q >= n_qubits:
            raise CircuitError(f"qubit {q} out of range for {n_qubits}-qubit circuit")


def append(circuit: CircuitDag, op: GateOp) -> CircuitDag:
    _check_bounds(op, circuit.n_qubits)
    return replace(circuit, ops=circuit.ops + (op,))


def compose(first: CircuitDag, second: CircuitDag) -> CircuitDag:
    """Run ``first`` then ``second`` on the wider of the two registers."""
    n = max(first.n_qubits, second.n_qubits)
    return CircuitDag(n, first.ops + second.ops, first.name or second.name)


@dataclass(frozen=True, eq=False)
class ParameterStore:
    """Canonical trainable vector with one name per entry."""

    values: np.ndarray
    symbols: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise CircuitError("parameter values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        symbols = tuple(self.symbols) or tuple(f"theta_{i}" for i in range(values.size))
        if len(symbols) != values.size:
            raise CircuitError(f"{len(symbols)} symbol names for {values.size} values")
        object.__setattr__(self, "symbols", symbols)

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, ParameterStore):
            return NotImplemented
        return self.symbols == other.symbols and np.array_equal(self.values, other.values)

    @property
    def p(self) -> int:
        return self.values.size

    def with_values(self, values) -> ParameterStore:
        return ParameterStore(np.asarray(values, dtype=float), self.symbols)

    def shifted(self, index: int, delta: float) -> ParameterStore:
        values = self.values.copy()
        values[index] += delta
        return ParameterStore(values, self.symbols)


def bind(circuit: CircuitDag, store: ParameterStore | Sequence[float]) -> CircuitDag:
    """Replace every symbol by its value in ``store``; bound params are kept."""
    values = store.values if isinstance(store, ParameterStore) else np.asarray(store, dtype=float)
    p = values.size
    ops = []
    for op in circuit.ops:
        if op.is_symbolic:
            if op.param.index >= p:
                raise CircuitError(
                    f"symbol {op.param.index} unresolved: parameter store has {p} entries")
            op = GateOp(op.kind, op.qubits, Bound(float(values[op.param.index])))
        ops.append(op)
    return replace(circuit, ops=tuple(ops))


def interaction_graph(circuit: CircuitDag) -> set[frozenset[int]]:
    return {frozenset(op.qubits) for op in circuit.ops if len(op.qubits) == 2}


@dataclass(frozen=True)
class GateCounts:
    n_1q: int
    n_2q: int
    depth: int


def counts(circuit: CircuitDag) -> GateCounts:
    """Gate counts by arity and ASAP depth. Global-phase ops are ignored."""
    level = [0] * circuit.n_qubits
    n1 = n2 = 0
    for op in circuit.ops:
        if not op.qubits:
            continue
        if len(op.qubits) == 1:
            n1 += 1
        else:
            n2 += 1
        t = max(level[q] for q in op.qubits) + 1
        for q in op.qubits:
            level[q] = t
    return GateCounts(n1, n2, max(level, default=0))


# --- observables -------------------------------------------------------------

@dataclass(frozen=True)
class PauliSum:
    """Weighted sum of Pauli strings; ``terms`` holds ``(coefficient, "ZIXI")``."""

    terms: tuple[tuple[float, str], ...]

    def __post_init__(self):
        terms = tuple((float(c), str(s).upper()) for c, s in self.terms)
        if not terms:
            raise CircuitError("PauliSum needs at least one term")
        n = len(terms[0][1])
        for c, s in terms:
            if len(s) != n:
                raise CircuitError("all Pauli strings must have the same length")
            if set(s) - set("IXYZ"):
                raise CircuitError(f"invalid Pauli label in {s!r}")
            if not np.isfinite(c):
                raise CircuitError("Pauli coefficients must be finite")
        object.__setattr__(self, "terms", terms)

    @property
    def n_qubits(self) -> int:
        return len(self.terms[0][1])

    def permuted(self, mapping: Sequence[int], n_qubits: int | None = None) -> PauliSum:
        """Move the label of qubit ``q`` to position ``mapping[q]``."""
        n = n_qubits or self.n_qubits
        out = []
        for c, s in self.terms:
            labels = ["I"] * n
            for q, ch in enumerate(s):
                labels[mapping[q]] = ch
            out.append((c, "".join(labels)))
        return PauliSum(tuple(out))


@dataclass(frozen=True)
class BasisProjector:
    """Projector onto one computational basis state; ``bits[j]`` is qubit j."""

    bits: str

    def __post_init__(self):
        bits = "".join(str(b) for b in self.bits)
        if not bits or set(bits) - {"0", "1"}:
            raise CircuitError(f"invalid bitstring {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @property
    def n_qubits(self) -> int:
        return len(self.bits)

    @property
    def index(self) -> int:
        return sum(1 << j for j, b in enumerate(self.bits) if b == "1")

    def permuted(self, mapping: Sequence[int], n_qubits: int | None = None) -> BasisProjector:
        n = n_qubits or self.n_qubits
        bits = ["0"] * n
        for q, b in enumerate(self.bits):
            bits[mapping[q]] = b
        return BasisProjector("".join(bits))


Observable = Union[PauliSum, BasisProjector]


def pauli(label: str, coeff: float = 1.0) -> PauliSum:
    return PauliSum(((coeff, label),))


def z_on(qubit: int, n_qubits: int) -> PauliSum:
    label = ["I"] * n_qubits
    label[qubit] = "Z"
    return pauli("".join(label))


def sum_z(n_qubits: int) -> PauliSum:
    return PauliSum(tuple((1.0, z_on(j, n_qubits).terms[0][1]) for j in range(n_qubits)))


_TERM = re.compile(r"([+-]*)(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)\*)?([IXYZixyz]+)")


def parse_observable(text: str) -> Observable:
    """``"ZI"``, ``"0.5*ZZ + -1*XI"``, or a projector as ``"proj:0000"`` / ``"|0000>"``."""
    text = text.strip()
    if text.startswith("proj:"):
        return BasisProjector(text[5:])
    if text.startswith("|") and text.endswith(">"):
        return BasisProjector(text[1:-1])
    body = text.replace(" ", "")
    terms, pos = [], 0
    for m in _TERM.finditer(body):
        if m.start() != pos:
            break
        sign = -1.0 if m.group(1).count("-") % 2 else 1.0
        terms.append((sign * float(m.group(2) or 1.0), m.group(3).upper()))
        pos = m.end()
    if pos != len(body):
        raise CircuitError(f"cannot parse observable {text!r}")
    if not terms:
        raise CircuitError(f"empty observable {text!r}")
    return PauliSum(tuple(terms))


@dataclass(frozen=True)
class MeasurementSpec:
    observables: tuple[Observable, ...]
    shots: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "observables", tuple(self.observables))
        if not self.observables:
            raise CircuitError("measurement spec needs at least one observable")
        if self.shots is not None and self.shots < 1:
            raise CircuitError("shots must be positive")

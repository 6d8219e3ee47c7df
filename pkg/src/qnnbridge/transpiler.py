"""Lowering of abstract circuits to a target's gate basis and coupling map.

The pipeline is decompose -> route -> decompose (inserted SWAPs) -> optimize,
followed by an optional unitary check that the compiled circuit equals the
abstract one up to global phase and the final qubit permutation.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .circuit import (Bound, CircuitDag, CircuitError, GateKind, GateOp, Observable,
                      Symbol, bind)
from .simulator import MAX_UNITARY_QUBITS, gate_matrix, rotation, unitary_of

G = GateKind
Edge = frozenset


class TranspileError(CircuitError):
    pass


# --- topologies --------------------------------------------------------------

def line(n: int) -> frozenset:
    return frozenset(Edge((i, i + 1)) for i in range(n - 1))


def ring(n: int) -> frozenset:
    return line(n) | {Edge((n - 1, 0))}


def heavy_hex(n: int, width: int = 5) -> frozenset:
    """Heavy-hex lattice truncated to its first ``n`` qubits.

    Rows of ``width`` qubits are joined by bridge qubits every fourth column,
    alternating offsets 0 and 2 between gaps. Qubits are numbered row by row
    with each gap's bridges before the next row, so every prefix is connected.
    """
    edges = set()
    next_id = 0
    prev_row = None
    gap = 0
    while next_id < n:
        if prev_row is not None:
            bridges = []
            for col in range(gap % 2 * 2, width, 4):
                bridges.append((col, next_id))
                edges.add(Edge((prev_row[col], next_id)))
                next_id += 1
            gap += 1
        # number outward from the first bridge column so each id touches an earlier one
        c0 = bridges[0][0] if prev_row is not None else 0
        order = list(range(c0, width)) + list(range(c0 - 1, -1, -1))
        row = [0] * width
        for k, col in enumerate(order):
            row[col] = next_id + k
        next_id += width
        edges.update(Edge((a, b)) for a, b in zip(row, row[1:]))
        if prev_row is not None:
            for col, b in bridges:
                edges.add(Edge((b, row[col])))
        prev_row = row
    return frozenset(e for e in edges if max(e) < n)


def octagonal(n: int) -> frozenset:
    """Chain of 8-qubit rings; neighbouring rings are linked by two couplers."""
    edges = set()
    for k in range(0, n, 8):
        ids = list(range(k, min(k + 8, n)))
        edges.update(Edge((a, b)) for a, b in zip(ids, ids[1:]))
        if len(ids) == 8:
            edges.add(Edge((ids[-1], ids[0])))
        if k > 0:
            edges.add(Edge((k - 5, k)))          # (8j+3, 8j+8)
            if k + 7 < n:
                edges.add(Edge((k - 4, k + 7)))  # (8j+4, 8j+15)
    return frozenset(edges)


TOPOLOGIES = {"line": line, "ring": ring, "heavy_hex": heavy_hex, "octagonal": octagonal}


# --- profiles ----------------------------------------------------------------

_ENTANGLERS = (G.CNOT, G.CZ, G.RZZ, G.RXX)
_AXES = {G.RX, G.RY, G.RZ}


@dataclass(frozen=True)
class TargetProfile:
    name: str
    basis: frozenset
    coupling_map: frozenset = frozenset()
    max_qubits: int = 32

    def __post_init__(self):
        object.__setattr__(self, "basis", frozenset(G(k) for k in self.basis))
        object.__setattr__(self, "coupling_map",
                           frozenset(Edge(int(q) for q in e) for e in self.coupling_map))
        check_universal(self.basis)
        for e in self.coupling_map:
            if len(e) != 2 or max(e) >= self.max_qubits:
                raise TranspileError(f"bad coupler {sorted(e)} for {self.max_qubits} qubits")

    @property
    def all_to_all(self) -> bool:
        return not self.coupling_map

    @classmethod
    def from_dict(cls, spec: dict) -> TargetProfile:
        """Build from a declarative mapping (see ``data/profiles.json``)."""
        n = int(spec["max_qubits"])
        coupling = spec.get("coupling", "all")
        if coupling == "all" or coupling is None:
            edges = frozenset()
        elif isinstance(coupling, dict):
            kind = coupling["kind"]
            if kind not in TOPOLOGIES:
                raise TranspileError(f"unknown topology {kind!r}")
            args = {k: v for k, v in coupling.items() if k != "kind"}
            edges = TOPOLOGIES[kind](n, **args)
        else:
            edges = frozenset(Edge(e) for e in coupling)
        return cls(spec["name"], frozenset(G(b) for b in spec["basis"]), edges, n)

    def to_dict(self) -> dict:
        return {"name": self.name, "basis": sorted(k.value for k in self.basis),
                "coupling": sorted(sorted(e) for e in self.coupling_map) or "all",
                "max_qubits": self.max_qubits}


def check_universal(basis: Iterable[GateKind]):
    basis = set(basis)
    if not basis & set(_ENTANGLERS):
        raise TranspileError(f"basis {sorted(b.value for b in basis)} has no two-qubit entangler")
    axes = basis & _AXES
    ok = len(axes) >= 2 or (G.RZ in basis and basis & {G.SX, G.H})
    if not ok:
        raise TranspileError(
            f"basis {sorted(b.value for b in basis)} cannot synthesize arbitrary 1-qubit unitaries")


def load_profiles(path: str | Path) -> dict[str, TargetProfile]:
    with open(path, encoding="utf-8") as fh:
        specs = json.load(fh)
    return {s["name"]: TargetProfile.from_dict(s) for s in specs}


_DATA = Path(__file__).with_name("data")
BUILTIN_PROFILES = load_profiles(_DATA / "profiles.json")


# --- one-qubit synthesis ------------------------------------------------------

_TOL = 1e-12


def _phase_between(target: np.ndarray, built: np.ndarray) -> float:
    k = np.unravel_index(np.argmax(np.abs(built)), built.shape)
    return float(np.angle(target[k] / built[k]))


def _proportional(a: np.ndarray, b: np.ndarray) -> bool:
    phase = np.exp(1j * _phase_between(a, b))
    return np.allclose(a, phase * b, atol=1e-12, rtol=0)


def zyz_angles(u: np.ndarray) -> tuple[float, float, float, float]:
    """(alpha, gamma, beta, delta) with u = e^{i alpha} Rz(gamma) Ry(beta) Rz(delta)."""
    det = np.linalg.det(u)
    alpha = np.angle(det) / 2
    v = u * np.exp(-1j * alpha)
    a, b = v[0, 0], v[1, 0]
    beta = 2 * np.arctan2(abs(b), abs(a))
    if abs(b) < _TOL:
        plus, minus = -2 * np.angle(a), 0.0
    elif abs(a) < _TOL:
        plus, minus = 0.0, 2 * np.angle(b)
    else:
        plus, minus = -2 * np.angle(a), 2 * np.angle(b)
    gamma, delta = (plus + minus) / 2, (plus - minus) / 2
    return float(alpha), float(gamma), float(beta), float(delta)


def _rot(kind, q, angle):
    return GateOp(kind, (q,), Bound(float(angle)))


def _fixed(kind, q):
    return GateOp(kind, (q,))


def _matrix_of(ops: Sequence[GateOp]) -> np.ndarray:
    m = np.eye(2, dtype=complex)
    for op in ops:
        m = (gate_matrix(op) if op.qubits else np.eye(2) * gate_matrix(op)[0, 0]) @ m
    return m


def _euler_ops(u: np.ndarray, q: int, basis: frozenset) -> list[GateOp]:
    """Time-ordered basis ops equal to ``u`` up to phase."""
    _, gamma, beta, delta = zyz_angles(u)
    if G.RZ in basis and G.RY in basis:
        return [_rot(G.RZ, q, delta), _rot(G.RY, q, beta), _rot(G.RZ, q, gamma)]
    if G.RZ in basis and G.RX in basis:
        return [_rot(G.RZ, q, delta - np.pi / 2), _rot(G.RX, q, beta),
                _rot(G.RZ, q, gamma + np.pi / 2)]
    if G.RZ in basis and G.SX in basis:
        return [_rot(G.RZ, q, delta), _fixed(G.SX, q), _rot(G.RZ, q, beta + np.pi),
                _fixed(G.SX, q), _rot(G.RZ, q, gamma + np.pi)]
    if G.RZ in basis and G.H in basis:
        return [_rot(G.RZ, q, delta - np.pi / 2), _fixed(G.H, q), _rot(G.RZ, q, beta),
                _fixed(G.H, q), _rot(G.RZ, q, gamma + np.pi / 2)]
    if G.RX in basis and G.RY in basis:
        # Rz(phi) = Rx(pi/2) Ry(phi) Rx(-pi/2)
        def rz(phi):
            return [_rot(G.RX, q, -np.pi / 2), _rot(G.RY, q, phi), _rot(G.RX, q, np.pi / 2)]
        return rz(delta) + [_rot(G.RY, q, beta)] + rz(gamma)
    raise TranspileError("basis cannot synthesize one-qubit unitaries")


def synthesize_1q(u: np.ndarray, q: int, basis: frozenset) -> list[GateOp]:
    """Short basis sequence for a fixed 2x2 unitary, global phase made explicit."""
    ops = _synth_core(u, q, basis)
    phase = _phase_between(u, _matrix_of(ops))
    if abs(np.angle(np.exp(1j * phase))) > _TOL:
        ops.append(GateOp(G.GPHASE, (), Bound(phase)))
    return ops


def _synth_core(u, q, basis):
    if _proportional(u, np.eye(2)):
        return []
    for kind in (G.H, G.X, G.SX, G.S, G.T):
        if kind in basis and _proportional(u, gate_matrix(_fixed(kind, q))):
            return [_fixed(kind, q)]
    _, gamma, beta, delta = zyz_angles(u)
    if abs(beta) < 1e-14 and G.RZ in basis:
        return [_rot(G.RZ, q, gamma + delta)]
    v = u * np.exp(-1j * np.angle(np.linalg.det(u)) / 2)
    for kind in (G.RX, G.RY):
        if kind in basis:
            # v = cos(t/2) I - i sin(t/2) P for a rotation about P
            gen = gate_matrix(_rot(kind, q, np.pi))
            theta = 2 * np.arctan2(np.real(np.trace(gen.conj().T @ v)) / 2, np.real(np.trace(v)) / 2)
            if _proportional(u, gate_matrix(_rot(kind, q, theta))):
                return [_rot(kind, q, theta)]
    if G.SX in basis and _proportional(u, gate_matrix(_fixed(G.H, q))):
        return [_rot(G.RZ, q, np.pi / 2), _fixed(G.SX, q), _rot(G.RZ, q, np.pi / 2)]
    return _euler_ops(u, q, basis)


# conjugations C with C R_b(t) C^dag = R_a(t) for every t, keyed by (a, b)
_CONJ = {
    (G.RY, G.RZ): gate_matrix(_fixed(G.S, 0)) @ gate_matrix(_fixed(G.H, 0)),
    (G.RY, G.RX): gate_matrix(_fixed(G.S, 0)),
    (G.RX, G.RZ): gate_matrix(_fixed(G.H, 0)),
    (G.RX, G.RY): gate_matrix(_fixed(G.S, 0)).conj().T,
    (G.RZ, G.RX): gate_matrix(_fixed(G.H, 0)),
    (G.RZ, G.RY): rotation(G.RX, np.pi / 2),
}


def _lower_1q(op: GateOp, basis: frozenset) -> list[GateOp]:
    if op.kind in basis:
        return [op]
    if op.is_symbolic:
        for b in (G.RZ, G.RX, G.RY):
            if b in basis and (op.kind, b) in _CONJ:
                c = _CONJ[(op.kind, b)]
                q = op.qubits[0]
                return (synthesize_1q(c.conj().T, q, basis) + [GateOp(b, op.qubits, op.param)]
                        + synthesize_1q(c, q, basis))
        raise TranspileError(f"no rewrite for symbolic {op.kind.value} into basis")
    return synthesize_1q(gate_matrix(op), op.qubits[0], basis)


# --- two-qubit rewrites --------------------------------------------------------

def _h(q):
    return _fixed(G.H, q)


def _rule(op: GateOp, to: GateKind) -> list[GateOp]:
    a, b = op.qubits
    k = op.kind
    if k is G.CZ and to is G.CNOT:
        return [_h(b), GateOp(G.CNOT, (a, b)), _h(b)]
    if k is G.CNOT and to is G.CZ:
        return [_h(b), GateOp(G.CZ, (a, b)), _h(b)]
    if k is G.SWAP:
        return [GateOp(G.CNOT, (a, b)), GateOp(G.CNOT, (b, a)), GateOp(G.CNOT, (a, b))]
    if k is G.RZZ and to is G.CNOT:
        return [GateOp(G.CNOT, (a, b)), GateOp(G.RZ, (b,), op.param), GateOp(G.CNOT, (a, b))]
    if k is G.RXX and to is G.RZZ:
        return [_h(a), _h(b), GateOp(G.RZZ, (a, b), op.param), _h(a), _h(b)]
    if k is G.RZZ and to is G.RXX:
        return [_h(a), _h(b), GateOp(G.RXX, (a, b), op.param), _h(a), _h(b)]
    if k is G.CZ and to is G.RZZ:
        return [_rot(G.RZ, a, np.pi / 2), _rot(G.RZ, b, np.pi / 2),
                GateOp(G.RZZ, (a, b), Bound(-np.pi / 2)), GateOp(G.GPHASE, (), Bound(np.pi / 4))]
    raise KeyError((k, to))


# next kind on the rewrite path from (kind) toward each entangler
_PATH = {
    G.CNOT: {G.CZ: G.CNOT, G.SWAP: G.CNOT, G.RZZ: G.CNOT, G.RXX: G.RZZ},
    G.CZ: {G.CNOT: G.CZ, G.SWAP: G.CNOT, G.RZZ: G.CNOT, G.RXX: G.RZZ},
    G.RZZ: {G.RXX: G.RZZ, G.CZ: G.RZZ, G.CNOT: G.CZ, G.SWAP: G.CNOT},
    G.RXX: {G.RZZ: G.RXX, G.CZ: G.RZZ, G.CNOT: G.CZ, G.SWAP: G.CNOT},
}


def _lower_2q(op: GateOp, ent: GateKind) -> list[GateOp]:
    if op.kind is ent:
        return [op]
    out = []
    for sub in _rule(op, _PATH[ent][op.kind]):
        out.extend(_lower_2q(sub, ent) if len(sub.qubits) == 2 else [sub])
    return out


def decompose(circuit: CircuitDag, basis: Iterable[GateKind]) -> CircuitDag:
    """Rewrite every op outside ``basis``; ops already in the basis are untouched."""
    basis = frozenset(G(b) for b in basis)
    check_universal(basis)
    ent = next(e for e in _ENTANGLERS if e in basis)
    out: list[GateOp] = []
    for op in circuit.ops:
        if op.kind in basis or op.kind is G.GPHASE:
            out.append(op)
        elif len(op.qubits) == 2:
            for sub in _lower_2q(op, ent):
                if len(sub.qubits) == 1:
                    out.extend(_lower_1q(sub, basis))
                else:
                    out.append(sub)
        else:
            out.extend(_lower_1q(op, basis))
    return CircuitDag(circuit.n_qubits, tuple(out), circuit.name)


# --- routing -----------------------------------------------------------------

@dataclass(frozen=True)
class TranspileReport:
    passes: tuple[str, ...] = ()
    swap_count: int = 0
    verification_residual: float | None = None


@dataclass(frozen=True)
class CompiledCircuit:
    """Circuit on physical qubits; ``layout[q]`` is where logical ``q`` ends up."""

    circuit: CircuitDag
    layout: tuple[int, ...]
    initial_layout: tuple[int, ...]
    report: TranspileReport = field(default_factory=TranspileReport)

    def map_observable(self, obs: Observable) -> Observable:
        return obs.permuted(self.layout, self.circuit.n_qubits)

    def map_bits(self, bits: str) -> str:
        """Physical measurement bitstring -> logical bitstring."""
        return "".join(bits[p] for p in self.layout)


def _adjacency(edges, nodes) -> dict[int, set[int]]:
    adj = {v: set() for v in nodes}
    for e in edges:
        a, b = tuple(e)
        if a in adj and b in adj:
            adj[a].add(b)
            adj[b].add(a)
    return adj


def _bfs_path(adj, src, dst) -> list[int]:
    prev = {src: None}
    queue = deque([src])
    while queue:
        v = queue.popleft()
        if v == dst:
            break
        for w in sorted(adj[v]):
            if w not in prev:
                prev[w] = v
                queue.append(w)
    if dst not in prev:
        raise TranspileError(f"physical qubits {src} and {dst} are not connected")
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    return path[::-1]


def route(circuit: CircuitDag, coupling_map: Iterable = (),
          initial_layout: Sequence[int] | None = None) -> CompiledCircuit:
    """Greedy SWAP insertion along BFS shortest paths.

    Logical qubits start on physical qubits ``initial_layout`` (identity by
    default), a permutation of ``range(n)``; routing stays inside that region.
    """
    n = circuit.n_qubits
    edges = frozenset(Edge(e) for e in coupling_map)
    init = tuple(range(n)) if initial_layout is None else tuple(int(q) for q in initial_layout)
    if sorted(init) != list(range(n)):
        raise TranspileError(f"initial layout {init} is not a permutation of range({n})")
    pos = list(init)
    if not edges:
        ops = [GateOp(op.kind, tuple(pos[q] for q in op.qubits), op.param) for op in circuit.ops]
        return CompiledCircuit(CircuitDag(n, tuple(ops), circuit.name), tuple(pos), init,
                               TranspileReport(("route",), 0))
    adj = _adjacency(edges, range(n))
    if n > 1:
        seen = {0}
        stack = [0]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != n:
            raise TranspileError(f"coupling map restricted to qubits 0..{n - 1} is disconnected")
    at = {p: q for q, p in enumerate(pos)}
    out: list[GateOp] = []
    swaps = 0
    for op in circuit.ops:
        if len(op.qubits) == 2:
            a, b = op.qubits
            if pos[b] not in adj[pos[a]]:
                path = _bfs_path(adj, pos[a], pos[b])
                for p0, p1 in zip(path[:-2], path[1:-1]):
                    out.append(GateOp(G.SWAP, (p0, p1)))
                    swaps += 1
                    q0, q1 = at.get(p0), at.get(p1)
                    at[p0], at[p1] = q1, q0
                    if q0 is not None:
                        pos[q0] = p1
                    if q1 is not None:
                        pos[q1] = p0
        out.append(GateOp(op.kind, tuple(pos[q] for q in op.qubits), op.param))
    return CompiledCircuit(CircuitDag(n, tuple(out), circuit.name), tuple(pos), init,
                           TranspileReport(("route",), swaps))


# --- optimization --------------------------------------------------------------

ROTATION_KINDS = {G.RX, G.RY, G.RZ, G.RZZ, G.RXX}
_SELF_INVERSE = {G.H, G.X, G.CNOT, G.CZ, G.SWAP}
_SYMMETRIC = {G.CZ, G.SWAP, G.RZZ, G.RXX}
_FOUR_PI = 4 * np.pi


def _same_support(a: GateOp, b: GateOp) -> bool:
    if a.kind in _SYMMETRIC:
        return set(a.qubits) == set(b.qubits)
    return a.qubits == b.qubits


def _optimize_pass(circuit: CircuitDag) -> tuple[list[GateOp], float, bool]:
    out: list[GateOp | None] = []
    last: dict[int, list[int]] = {q: [] for q in range(circuit.n_qubits)}
    phase = 0.0
    changed = False

    def drop(i):
        for q in out[i].qubits:
            last[q].pop()
        out[i] = None

    for op in circuit.ops:
        if op.kind is G.GPHASE:
            phase += op.angle
            continue
        if op.kind in ROTATION_KINDS and not op.is_symbolic:
            a = np.mod(op.angle, _FOUR_PI)
            if min(a, _FOUR_PI - a) < 1e-12:
                changed = True
                continue
        tops = {last[q][-1] if last[q] else None for q in op.qubits}
        prev_i = tops.pop() if len(tops) == 1 else None
        prev = out[prev_i] if prev_i is not None else None
        if prev is not None and prev.kind is op.kind and _same_support(prev, op):
            if op.kind in _SELF_INVERSE:
                drop(prev_i)
                changed = True
                continue
            if op.kind in ROTATION_KINDS and not op.is_symbolic and not prev.is_symbolic:
                total = np.mod(prev.angle + op.angle, _FOUR_PI)
                changed = True
                if min(total, _FOUR_PI - total) < 1e-12:
                    drop(prev_i)
                else:
                    out[prev_i] = GateOp(op.kind, prev.qubits, Bound(float(total)))
                continue
        out.append(op)
        for q in op.qubits:
            last[q].append(len(out) - 1)
    return [o for o in out if o is not None], phase, changed


def optimize(circuit: CircuitDag) -> CircuitDag:
    """Peephole merge/cancel to a fixed point; all global phase lands in one leading op."""
    ops = list(circuit.ops)
    phase = 0.0
    while True:
        ops, dphase, changed = _optimize_pass(CircuitDag(circuit.n_qubits, tuple(ops)))
        phase += dphase
        if not changed:
            break
    phase = math.remainder(phase, 2 * np.pi)
    if abs(phase) > _TOL:
        ops.insert(0, GateOp(G.GPHASE, (), Bound(phase)))
    return CircuitDag(circuit.n_qubits, tuple(ops), circuit.name)


# --- verification --------------------------------------------------------------

def permutation_matrix(layout: Sequence[int]) -> np.ndarray:
    """Operator moving the bit of logical qubit q to position ``layout[q]``."""
    n = len(layout)
    idx = np.arange(2 ** n)
    target = np.zeros_like(idx)
    for q, p in enumerate(layout):
        target |= ((idx >> q) & 1) << p
    perm = np.zeros((2 ** n, 2 ** n))
    perm[target, idx] = 1
    return perm


@dataclass(frozen=True)
class Verification:
    equivalent: bool
    residual: float


def verify(abstract: CircuitDag, compiled: CompiledCircuit | CircuitDag,
           tolerance: float = 1e-9) -> Verification:
    """Phase-aligned Frobenius distance between abstract and compiled unitaries."""
    if isinstance(compiled, CircuitDag):
        n = compiled.n_qubits
        compiled = CompiledCircuit(compiled, tuple(range(n)), tuple(range(n)))
    n = abstract.n_qubits
    if compiled.circuit.n_qubits != n:
        raise TranspileError("compiled circuit width differs from the abstract circuit")
    if sorted(compiled.layout) != list(range(n)) or sorted(compiled.initial_layout) != list(range(n)):
        raise TranspileError("layout is not a bijection; cannot invert")
    if n > MAX_UNITARY_QUBITS:
        raise TranspileError(f"verification limited to {MAX_UNITARY_QUBITS} qubits")
    u_c = unitary_of(compiled.circuit)
    u_fixed = permutation_matrix(compiled.layout).T @ u_c @ permutation_matrix(compiled.initial_layout)
    m = u_fixed @ unitary_of(abstract).conj().T
    k = int(np.argmax(np.abs(np.diag(m))))
    phase = m[k, k] / abs(m[k, k]) if abs(m[k, k]) > 0 else 1.0
    residual = float(np.linalg.norm(m - phase * np.eye(2 ** n)))
    return Verification(residual < tolerance * 2 ** (n / 2), residual)


def transpile(circuit: CircuitDag, profile: TargetProfile, verify_flag: bool = True,
              initial_layout: Sequence[int] | None = None, seed: int = 0) -> CompiledCircuit:
    if circuit.n_qubits > profile.max_qubits:
        raise TranspileError(
            f"circuit needs {circuit.n_qubits} qubits, {profile.name} has {profile.max_qubits}")
    passes = ["decompose"]
    lowered = decompose(circuit, profile.basis)
    routed = route(lowered, profile.coupling_map, initial_layout)
    passes.append("route")
    body = routed.circuit
    if routed.report.swap_count and G.SWAP not in profile.basis:
        body = decompose(body, profile.basis)
        passes.append("decompose")
    body = optimize(body)
    passes.append("optimize")
    residual = None
    if verify_flag and circuit.n_qubits <= MAX_UNITARY_QUBITS:
        candidate = CompiledCircuit(body, routed.layout, routed.initial_layout)
        abstract = circuit
        if not circuit.is_bound:
            # symbols survive compilation one-to-one; check at a random binding
            p = max(circuit.symbols) + 1
            values = np.random.default_rng(seed).uniform(-np.pi, np.pi, p)
            abstract = bind(circuit, values)
            candidate = CompiledCircuit(bind(body, values), routed.layout, routed.initial_layout)
        check = verify(abstract, candidate)
        residual = check.residual
        passes.append("verify")
        if not check.equivalent:
            raise TranspileError(f"compiled circuit differs from source (residual {residual:.3e})")
    report = TranspileReport(tuple(passes), routed.report.swap_count, residual)
    return CompiledCircuit(body, routed.layout, routed.initial_layout, report)


def respects_coupling(circuit: CircuitDag, coupling_map: Iterable) -> bool:
    edges = frozenset(Edge(e) for e in coupling_map)
    if not edges:
        return True
    return all(Edge(op.qubits) in edges for op in circuit.ops if len(op.qubits) == 2)


def in_basis(circuit: CircuitDag, basis: Iterable[GateKind]) -> bool:
    basis = set(basis) | {G.GPHASE}
    return all(op.kind in basis for op in circuit.ops)


__all__ = [
    "TargetProfile", "CompiledCircuit", "TranspileReport", "TranspileError", "Verification",
    "BUILTIN_PROFILES", "decompose", "route", "optimize", "verify", "transpile",
    "synthesize_1q", "zyz_angles", "line", "ring", "heavy_hex", "octagonal", "load_profiles",
    "respects_coupling", "in_basis", "permutation_matrix", "Symbol",
]

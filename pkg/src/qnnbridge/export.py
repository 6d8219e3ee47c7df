"""Model bundles, OpenQASM 2.0 subset, and framework-dialect documents.

Floats are written with ``repr``, the shortest decimal that parses back to the
identical double, so the canonical path is bit-exact.
"""
from __future__ import annotations

import ast
import json
import math
import operator
import re
from dataclasses import dataclass, field
from typing import Sequence

import jsonschema
import numpy as np

from .circuit import (BasisProjector, Bound, CircuitDag, CircuitError, GateKind, GateOp,
                      Observable, ParameterStore, PauliSum, Symbol)
from .encoders import EncodingConfig
from .model import predict_proba
from .transpiler import decompose

G = GateKind
FORMAT_VERSION = "1.0"


class ExportError(CircuitError):
    pass


# --- bundle -----------------------------------------------------------------------

@dataclass(frozen=True)
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def __eq__(self, other):
        if not isinstance(other, AdamState):
            return NotImplemented
        same = (self.lr, self.beta1, self.beta2, self.eps, self.step) == \
               (other.lr, other.beta1, other.beta2, other.eps, other.step)
        return same and _arr_eq(self.m, other.m) and _arr_eq(self.v, other.v)


def _arr_eq(a, b):
    if a is None or b is None:
        return a is None and b is None
    return np.array_equal(np.asarray(a), np.asarray(b))


@dataclass(frozen=True)
class HistoryEntry:
    epoch: int
    loss: float
    accuracy: float


@dataclass(frozen=True, eq=False)
class ModelBundle:
    circuit: CircuitDag
    parameters: ParameterStore
    encoding: EncodingConfig
    observables: tuple[Observable, ...]
    n_classes: int
    training_history: tuple[HistoryEntry, ...] = ()
    optimizer_state: AdamState | None = None
    format_version: str = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "observables", tuple(self.observables))
        object.__setattr__(self, "training_history", tuple(self.training_history))
        used = self.circuit.symbols
        if used and used[-1] >= self.parameters.p:
            raise ExportError(
                f"circuit uses symbol {used[-1]} but only {self.parameters.p} parameters are stored")
        if len(self.observables) != self.n_classes:
            raise ExportError(f"{len(self.observables)} observables for {self.n_classes} classes")

    def __eq__(self, other):
        if not isinstance(other, ModelBundle):
            return NotImplemented
        return (self.circuit == other.circuit and self.parameters == other.parameters
                and self.encoding == other.encoding and self.observables == other.observables
                and self.n_classes == other.n_classes
                and self.training_history == other.training_history
                and self.optimizer_state == other.optimizer_state
                and self.format_version == other.format_version)

    def probabilities(self, xs) -> np.ndarray:
        return predict_proba(self.circuit, self.parameters.values, self.encoding,
                             self.observables, xs)

    def with_circuit(self, circuit: CircuitDag, parameters: ParameterStore | None = None) -> ModelBundle:
        return ModelBundle(circuit, parameters or self.parameters, self.encoding, self.observables,
                           self.n_classes, self.training_history, self.optimizer_state,
                           self.format_version)


_NUM = {"type": "number"}
_PARAM = {"oneOf": [
    {"type": "null"},
    {"type": "object", "properties": {"bound": _NUM}, "required": ["bound"], "additionalProperties": False},
    {"type": "object", "properties": {"symbol": {"type": "integer", "minimum": 0}},
     "required": ["symbol"], "additionalProperties": False},
]}
_OBS = {"oneOf": [
    {"type": "object", "properties": {"type": {"const": "pauli_sum"},
                                      "terms": {"type": "array", "minItems": 1, "items": {
                                          "type": "array", "prefixItems": [_NUM, {"type": "string"}],
                                          "minItems": 2, "maxItems": 2}}},
     "required": ["type", "terms"]},
    {"type": "object", "properties": {"type": {"const": "projector"},
                                      "bits": {"type": "string", "pattern": "^[01]+$"}},
     "required": ["type", "bits"]},
]}
BUNDLE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["format_version", "circuit", "parameters", "encoding", "observable", "head",
                 "training_history", "optimizer_state"],
    "additionalProperties": False,
    "properties": {
        "format_version": {"type": "string"},
        "circuit": {
            "type": "object", "required": ["n_qubits", "ops"],
            "properties": {
                "n_qubits": {"type": "integer", "minimum": 1},
                "name": {"type": "string"},
                "ops": {"type": "array", "items": {
                    "type": "object", "required": ["kind", "qubits", "param"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"type": "string"},
                        "qubits": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                        "param": _PARAM}}}}},
        "parameters": {
            "type": "object", "required": ["values", "symbols"],
            "properties": {"values": {"type": "array", "items": _NUM},
                           "symbols": {"type": "array", "items": {"type": "string"}}}},
        "encoding": {"type": "object", "required": ["kind"]},
        "observable": {"type": "array", "items": _OBS},
        "head": {"type": "object", "required": ["type", "n_classes"],
                 "properties": {"type": {"const": "softmax"},
                                "n_classes": {"type": "integer", "minimum": 1}}},
        "training_history": {"type": "array", "items": {
            "type": "object", "required": ["epoch", "loss", "accuracy"],
            "properties": {"epoch": {"type": "integer"}, "loss": _NUM, "accuracy": _NUM}}},
        "optimizer_state": {"oneOf": [{"type": "null"}, {
            "type": "object",
            "required": ["name", "lr", "beta1", "beta2", "eps", "step", "m", "v"],
            "properties": {"name": {"const": "adam"}, "step": {"type": "integer", "minimum": 0},
                           "m": {"type": ["array", "null"], "items": _NUM},
                           "v": {"type": ["array", "null"], "items": _NUM}}}]},
    },
}


def _floats(values) -> list[float]:
    return [float(v) for v in np.asarray(values, dtype=float).reshape(-1)]


def op_to_dict(op: GateOp) -> dict:
    if op.param is None:
        param = None
    elif isinstance(op.param, Symbol):
        param = {"symbol": op.param.index}
    else:
        param = {"bound": float(op.param.value)}
    return {"kind": op.kind.value, "qubits": list(op.qubits), "param": param}


def _gate_kind(name: str, where: str) -> GateKind:
    try:
        return GateKind(name)
    except ValueError:
        raise ExportError(f"{where}: unknown gate {name!r}") from None


def op_from_dict(d: dict, where: str = "op") -> GateOp:
    kind = _gate_kind(d["kind"], where)
    p = d.get("param")
    param = None if p is None else Symbol(int(p["symbol"])) if "symbol" in p else Bound(float(p["bound"]))
    try:
        return GateOp(kind, tuple(d["qubits"]), param)
    except CircuitError as exc:
        raise ExportError(f"{where}: {exc}") from None


def circuit_to_dict(circuit: CircuitDag) -> dict:
    return {"n_qubits": circuit.n_qubits, "name": circuit.name,
            "ops": [op_to_dict(op) for op in circuit.ops]}


def circuit_from_dict(d: dict) -> CircuitDag:
    ops = tuple(op_from_dict(o, f"circuit.ops[{i}]") for i, o in enumerate(d["ops"]))
    try:
        return CircuitDag(int(d["n_qubits"]), ops, d.get("name", ""))
    except CircuitError as exc:
        raise ExportError(f"circuit: {exc}") from None


def observable_to_dict(obs: Observable) -> dict:
    if isinstance(obs, BasisProjector):
        return {"type": "projector", "bits": obs.bits}
    return {"type": "pauli_sum", "terms": [[c, s] for c, s in obs.terms]}


def observable_from_dict(d: dict) -> Observable:
    if d["type"] == "projector":
        return BasisProjector(d["bits"])
    return PauliSum(tuple((float(c), s) for c, s in d["terms"]))


def bundle_to_dict(bundle: ModelBundle) -> dict:
    opt = bundle.optimizer_state
    return {
        "format_version": bundle.format_version,
        "circuit": circuit_to_dict(bundle.circuit),
        "parameters": {"values": _floats(bundle.parameters.values),
                       "symbols": list(bundle.parameters.symbols)},
        "encoding": bundle.encoding.to_dict(),
        "observable": [observable_to_dict(o) for o in bundle.observables],
        "head": {"type": "softmax", "n_classes": bundle.n_classes},
        "training_history": [{"epoch": h.epoch, "loss": float(h.loss), "accuracy": float(h.accuracy)}
                             for h in bundle.training_history],
        "optimizer_state": None if opt is None else {
            "name": "adam", "lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps,
            "step": opt.step, "m": None if opt.m is None else _floats(opt.m),
            "v": None if opt.v is None else _floats(opt.v)},
    }


def export_bundle(bundle: ModelBundle) -> str:
    return json.dumps(bundle_to_dict(bundle), indent=1, allow_nan=False)


def _path(error: jsonschema.ValidationError) -> str:
    out = "$"
    for part in error.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else f".{part}"
    return out


def validate_bundle_dict(d: dict):
    if isinstance(d, dict) and "format_version" in d and d["format_version"] != FORMAT_VERSION:
        raise ExportError(f"unsupported format_version {d['format_version']!r} (expected {FORMAT_VERSION})")
    validator = jsonschema.Draft202012Validator(BUNDLE_SCHEMA)
    errors = sorted(validator.iter_errors(d), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ExportError(f"schema violation at {_path(e)}: {e.message}")


def bundle_from_dict(d: dict) -> ModelBundle:
    validate_bundle_dict(d)
    opt = d["optimizer_state"]
    state = None if opt is None else AdamState(
        float(opt["lr"]), float(opt["beta1"]), float(opt["beta2"]), float(opt["eps"]), int(opt["step"]),
        None if opt["m"] is None else np.array(opt["m"], dtype=float),
        None if opt["v"] is None else np.array(opt["v"], dtype=float))
    return ModelBundle(
        circuit_from_dict(d["circuit"]),
        ParameterStore(np.array(d["parameters"]["values"], dtype=float), tuple(d["parameters"]["symbols"])),
        EncodingConfig.from_dict(d["encoding"]),
        tuple(observable_from_dict(o) for o in d["observable"]),
        int(d["head"]["n_classes"]),
        tuple(HistoryEntry(int(h["epoch"]), float(h["loss"]), float(h["accuracy"]))
              for h in d["training_history"]),
        state,
        d["format_version"],
    )


def import_bundle(text: str) -> ModelBundle:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ExportError(f"malformed JSON: {exc}") from None
    return bundle_from_dict(d)


# --- OpenQASM 2.0 subset -------------------------------------------------------------

QASM_BASIS = frozenset({G.RX, G.RY, G.RZ, G.CNOT, G.CZ, G.H, G.S, G.T})
_QASM_NAME = {G.RX: "rx", G.RY: "ry", G.RZ: "rz", G.CNOT: "cx", G.CZ: "cz", G.H: "h", G.S: "s", G.T: "t"}
_QASM_KIND = {v: k for k, v in _QASM_NAME.items()}


def export_qasm(circuit: CircuitDag) -> str:
    """OpenQASM 2.0 text; gates outside the subset are decomposed first.

    Global phase has no QASM 2.0 statement and is kept in a comment.
    """
    if not circuit.is_bound:
        raise ExportError("export_qasm needs a bound circuit; bind the parameters first")
    lowered = decompose(circuit, QASM_BASIS)
    phase = sum(op.angle for op in lowered.ops if op.kind is G.GPHASE)
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";']
    if phase:
        lines.append(f"// global_phase {math.remainder(phase, 2 * math.pi)!r}")
    lines.append(f"qreg q[{circuit.n_qubits}];")
    for op in lowered.ops:
        if op.kind is G.GPHASE:
            continue
        args = ",".join(f"q[{q}]" for q in op.qubits)
        name = _QASM_NAME[op.kind]
        if op.kind.parametric:
            name += f"({op.angle!r})"
        lines.append(f"{name} {args};")
    return "\n".join(lines) + "\n"


_BIN = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval_angle(text: str) -> float:
    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BIN:
            return _BIN[type(node.op)](ev(node.left), ev(node.right))
        raise ExportError(f"unsupported angle expression {text!r}")
    try:
        return ev(ast.parse(text.strip(), mode="eval").body)
    except SyntaxError:
        raise ExportError(f"unsupported angle expression {text!r}") from None


_STMT = re.compile(r"^(\w+)\s*(?:\(([^)]*)\))?\s+(q\[\d+\](?:\s*,\s*q\[\d+\])*)\s*;$")


def parse_qasm(text: str) -> CircuitDag:
    """Parse the subset written by :func:`export_qasm`."""
    n = None
    ops = []
    phase = 0.0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("// global_phase"):
            phase = float(line.split()[-1])
            continue
        line = line.split("//")[0].strip()
        if not line or line.startswith("OPENQASM") or line.startswith("include"):
            continue
        m = re.match(r"^qreg\s+q\[(\d+)\]\s*;$", line)
        if m:
            n = int(m.group(1))
            continue
        m = _STMT.match(line)
        if not m:
            raise ExportError(f"line {lineno}: cannot parse {raw!r}")
        name, angle, args = m.groups()
        if name not in _QASM_KIND:
            raise ExportError(f"line {lineno}: gate {name!r} is outside the supported subset")
        kind = _QASM_KIND[name]
        qubits = tuple(int(q) for q in re.findall(r"q\[(\d+)\]", args))
        if kind.parametric != (angle is not None):
            raise ExportError(f"line {lineno}: wrong parameter list for {name}")
        param = Bound(_eval_angle(angle)) if angle is not None else None
        ops.append(GateOp(kind, qubits, param))
    if n is None:
        raise ExportError("missing qreg declaration")
    if phase:
        ops.insert(0, GateOp(G.GPHASE, (), Bound(phase)))
    return CircuitDag(n, tuple(ops))


# --- dialects --------------------------------------------------------------------------

@dataclass(frozen=True)
class DialectMap:
    """Gate-name table; ``param_scale[kind]`` multiplies the radian angle on export."""

    name: str
    gates: dict
    qubit_field: str = "qubits"
    param_field: str = "theta"
    param_scale: dict = field(default_factory=dict)
    notes: str = ""

    def label(self, kind: GateKind) -> str:
        try:
            return self.gates[kind]
        except KeyError:
            raise ExportError(f"dialect {self.name} has no name for {kind.value}") from None

    def kind(self, label: str) -> GateKind:
        for k, v in self.gates.items():
            if v == label:
                return k
        raise ExportError(f"dialect {self.name}: unknown gate {label!r}")


_PI = math.pi
DIALECTS = {
    "qiskit": DialectMap("qiskit", {
        G.RX: "rx", G.RY: "ry", G.RZ: "rz", G.CNOT: "cx", G.CZ: "cz", G.H: "h", G.S: "s",
        G.T: "t", G.X: "x", G.SX: "sx", G.SWAP: "swap", G.RZZ: "rzz", G.RXX: "rxx"},
        "qubits", "theta", notes="angles in radians"),
    "cirq": DialectMap("cirq", {
        G.RX: "Rx", G.RY: "Ry", G.RZ: "Rz", G.CNOT: "CNOT", G.CZ: "CZ", G.H: "H", G.S: "S",
        G.T: "T", G.X: "X", G.SX: "X**0.5", G.SWAP: "SWAP", G.RZZ: "ZZ", G.RXX: "XX"},
        "qubits", "rads", {G.RZZ: 1 / _PI, G.RXX: 1 / _PI},
        notes="Rx/Ry/Rz carry radians; ZZ/XX carry exponent theta/pi (equal to Rzz/Rxx up to global phase)"),
    "pennylane": DialectMap("pennylane", {
        G.RX: "RX", G.RY: "RY", G.RZ: "RZ", G.CNOT: "CNOT", G.CZ: "CZ", G.H: "Hadamard",
        G.S: "S", G.T: "T", G.X: "PauliX", G.SX: "SX", G.SWAP: "SWAP", G.RZZ: "IsingZZ",
        G.RXX: "IsingXX"},
        "wires", "phi", notes="angles in radians"),
    "braket": DialectMap("braket", {
        G.RX: "rx", G.RY: "ry", G.RZ: "rz", G.CNOT: "cnot", G.CZ: "cz", G.H: "h", G.S: "s",
        G.T: "t", G.X: "x", G.SX: "v", G.SWAP: "swap", G.RZZ: "zz", G.RXX: "xx"},
        "targets", "angle", notes="angles in radians"),
}


def get_dialect(name: str | DialectMap) -> DialectMap:
    if isinstance(name, DialectMap):
        return name
    key = str(name).lower().removesuffix("-style")
    if key not in DIALECTS:
        raise ExportError(f"unknown dialect {name!r}; expected one of {sorted(DIALECTS)}")
    return DIALECTS[key]


def export_dialect(circuit: CircuitDag, dialect: str | DialectMap,
                   parameters: ParameterStore | None = None, decimals: int | None = None) -> str:
    """JSON document in a framework's naming conventions.

    Symbolic angles are written by name and resolved from the document's
    ``parameters`` table. ``decimals`` rounds every number (for sensitivity
    experiments; the default keeps full precision).
    """
    d = get_dialect(dialect)

    def num(x):
        return float(round(x, decimals)) if decimals is not None else float(x)

    names = parameters.symbols if parameters is not None else None
    gates = []
    phase = 0.0
    for op in circuit.ops:
        if op.kind is G.GPHASE:
            phase += op.angle
            continue
        entry = {"gate": d.label(op.kind), d.qubit_field: list(op.qubits)}
        if op.kind.parametric:
            scale = d.param_scale.get(op.kind, 1.0)
            if op.is_symbolic:
                name = names[op.param.index] if names and op.param.index < len(names) \
                    else f"theta_{op.param.index}"
                entry[d.param_field] = {"symbol": name, "index": op.param.index, "scale": scale}
            else:
                entry[d.param_field] = num(op.angle * scale)
        gates.append(entry)
    doc = {"dialect": d.name, "n_qubits": circuit.n_qubits, "global_phase": num(phase),
           "gates": gates}
    if parameters is not None:
        doc["parameters"] = {"symbols": list(parameters.symbols),
                             "values": [num(v) for v in parameters.values]}
    return json.dumps(doc, indent=1, allow_nan=False)


def import_dialect(text: str) -> tuple[CircuitDag, ParameterStore | None]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ExportError(f"malformed JSON: {exc}") from None
    d = get_dialect(doc.get("dialect", ""))
    ops = []
    if doc.get("global_phase"):
        ops.append(GateOp(G.GPHASE, (), Bound(float(doc["global_phase"]))))
    for i, g in enumerate(doc["gates"]):
        kind = d.kind(g["gate"])
        param = None
        if kind.parametric:
            raw = g.get(d.param_field)
            if raw is None:
                raise ExportError(f"gates[{i}]: missing {d.param_field!r}")
            scale = d.param_scale.get(kind, 1.0)
            param = Symbol(int(raw["index"])) if isinstance(raw, dict) else Bound(float(raw) / scale)
        try:
            ops.append(GateOp(kind, tuple(g[d.qubit_field]), param))
        except (CircuitError, KeyError) as exc:
            raise ExportError(f"gates[{i}]: {exc}") from None
    store = None
    if "parameters" in doc:
        store = ParameterStore(np.array(doc["parameters"]["values"], dtype=float),
                               tuple(doc["parameters"]["symbols"]))
    return CircuitDag(int(doc["n_qubits"]), tuple(ops)), store


# --- round trip -------------------------------------------------------------------------

@dataclass(frozen=True)
class RoundTrip:
    fidelity: float
    max_l1: float


def reimport(bundle: ModelBundle, via: str = "canonical", decimals: int | None = None) -> ModelBundle:
    if via == "canonical":
        return import_bundle(export_bundle(bundle))
    if via == "qasm":
        raise ExportError("qasm carries bound circuits only; use a dialect or canonical JSON")
    circuit, store = import_dialect(export_dialect(bundle.circuit, via, bundle.parameters, decimals))
    return bundle.with_circuit(circuit, store)


def roundtrip_fidelity(bundle: ModelBundle, via: str, xs, decimals: int | None = None) -> RoundTrip:
    """F_RT = 1 - mean L1 distance of class probabilities before/after re-import."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[0] == 0:
        raise ExportError("round-trip fidelity needs a non-empty test set")
    before = bundle.probabilities(xs)
    after = reimport(bundle, via, decimals).probabilities(xs)
    l1 = np.abs(before - after).sum(axis=1)
    return RoundTrip(float(1 - l1.mean()), float(l1.max()))


def dialect_paths(bundle: ModelBundle, xs, dialects: Sequence[str] = tuple(DIALECTS)) -> dict:
    """Fidelity for every ordered dialect pair (export via i, re-import, export via j)."""
    out = {}
    for i in dialects:
        mid = reimport(bundle, i)
        for j in dialects:
            out[(i, j)] = roundtrip_fidelity(mid, j, xs)
    return out


__all__ = [
    "ModelBundle", "AdamState", "HistoryEntry", "DialectMap", "DIALECTS", "RoundTrip",
    "ExportError", "FORMAT_VERSION", "BUNDLE_SCHEMA", "export_bundle", "import_bundle",
    "export_qasm", "parse_qasm", "export_dialect", "import_dialect", "get_dialect",
    "roundtrip_fidelity", "reimport", "dialect_paths", "circuit_to_dict", "circuit_from_dict",
]

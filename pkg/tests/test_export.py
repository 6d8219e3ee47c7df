import json

import numpy as np
import pytest

import oracle
from qnnbridge.circuit import CircuitDag, ParameterStore, gate
from qnnbridge.encoders import EncodingConfig
from qnnbridge.export import (DIALECTS, AdamState, ExportError, HistoryEntry, ModelBundle,
                              bundle_to_dict, dialect_paths, export_bundle, export_dialect,
                              export_qasm, import_bundle, import_dialect, parse_qasm, reimport,
                              roundtrip_fidelity)
from qnnbridge.model import class_observables, hardware_efficient_ansatz
from qnnbridge.reproduce import random_circuit
from qnnbridge.training import QuantumLayer, TrainConfig, load_iris, train


def toy_bundle(seed=0, n=3, layers=2, classes=3):
    rng = np.random.default_rng(seed)
    circ = hardware_efficient_ansatz(n, layers)
    p = 2 * n * layers
    values = rng.normal(size=p)
    store = ParameterStore(values, tuple(f"w{k}" for k in range(p)))
    opt = AdamState(0.01, 0.9, 0.999, 1e-8, 17, rng.normal(size=p), rng.random(p))
    hist = (HistoryEntry(1, 1.2345678901234567, 0.5), HistoryEntry(2, 0.1 + 0.2, 2 / 3))
    return ModelBundle(circ, store, EncodingConfig("angle", "y"), class_observables(n, classes),
                       classes, hist, opt)


@pytest.fixture(scope="module")
def iris_model():
    data = load_iris(seed=0)
    layer = QuantumLayer.classifier(4, 2, 3)
    res = train(layer, data, TrainConfig(epochs=3, seed=0))
    return res.bundle, data.x_test


# --- canonical JSON --------------------------------------------------------------

def test_canonical_round_trip_identity():
    for seed in range(5):
        b = toy_bundle(seed)
        again = import_bundle(export_bundle(b))
        assert again == b
        assert np.array_equal(again.parameters.values, b.parameters.values)
        assert np.array_equal(again.optimizer_state.m, b.optimizer_state.m)


def test_floats_bit_exact():
    b = toy_bundle()
    vals = np.array([np.nextafter(1.0, 2.0), 1e-300, -np.pi, 2 ** -1074, 0.1 + 0.2, 1 / 3])
    b = ModelBundle(CircuitDag(1, (gate("ry", 0, param=vals[2]),)), ParameterStore(vals),
                    b.encoding, b.observables[:2], 2)
    again = import_bundle(export_bundle(b))
    assert again.parameters.values.tobytes() == vals.tobytes()
    assert again.circuit.ops[0].angle == -np.pi


def test_schema_field_names():
    d = bundle_to_dict(toy_bundle())
    assert set(d) == {"format_version", "circuit", "parameters", "encoding", "observable", "head",
                      "training_history", "optimizer_state"}
    assert set(d["circuit"]) >= {"n_qubits", "ops"}
    assert d["circuit"]["ops"][0] == {"kind": "ry", "qubits": [0], "param": {"symbol": 0}}


def test_unknown_gate_named():
    d = bundle_to_dict(toy_bundle())
    d["circuit"]["ops"][4]["kind"] = "toffoli"
    with pytest.raises(ExportError, match="toffoli"):
        import_bundle(json.dumps(d))


def test_schema_violation_has_path():
    d = bundle_to_dict(toy_bundle())
    d["parameters"]["values"][2] = "oops"
    with pytest.raises(ExportError, match=r"\$\.parameters\.values\[2\]"):
        import_bundle(json.dumps(d))
    d = bundle_to_dict(toy_bundle())
    del d["head"]
    with pytest.raises(ExportError, match="head"):
        import_bundle(json.dumps(d))


def test_unknown_version_and_malformed():
    d = bundle_to_dict(toy_bundle())
    d["format_version"] = "9.9"
    with pytest.raises(ExportError, match="9.9"):
        import_bundle(json.dumps(d))
    with pytest.raises(ExportError, match="malformed"):
        import_bundle("{not json")


def test_bundle_invariants():
    b = toy_bundle()
    with pytest.raises(ExportError, match="symbol"):
        ModelBundle(b.circuit, ParameterStore(np.zeros(3)), b.encoding, b.observables, 3)
    with pytest.raises(ExportError, match="observables"):
        ModelBundle(b.circuit, b.parameters, b.encoding, b.observables, 2)


def test_trained_bundle_canonical_fidelity_exact(iris_model):
    bundle, xs = iris_model
    rt = roundtrip_fidelity(bundle, "canonical", xs)
    assert rt.fidelity == 1.0 and rt.max_l1 == 0.0


# --- QASM --------------------------------------------------------------------------

def test_qasm_bell():
    text = export_qasm(CircuitDag(2, (gate("h", 0), gate("cnot", 0, 1))))
    assert "qreg q[2];" in text
    assert "h q[0];" in text and "cx q[0],q[1];" in text


def test_qasm_rzz_triplet():
    text = export_qasm(CircuitDag(2, (gate("rzz", 0, 1, param=0.25),)))
    body = [ln.split("(")[0].split()[0] for ln in text.splitlines()
            if ln and not ln.startswith(("OPENQASM", "include", "qreg", "//"))]
    assert body == ["cx", "rz", "cx"]


def test_qasm_parse_back(rng):
    for _ in range(30):
        c = random_circuit(rng, int(rng.integers(1, 5)), 15)
        back = parse_qasm(export_qasm(c))
        assert oracle.phase_distance(oracle.unitary(back), oracle.unitary(c)) < 1e-9


def test_qasm_errors():
    b = toy_bundle()
    with pytest.raises(ExportError, match="bound"):
        export_qasm(b.circuit)
    with pytest.raises(ExportError, match="ccx"):
        parse_qasm("OPENQASM 2.0;\nqreg q[3];\nccx q[0],q[1],q[2];\n")
    with pytest.raises(ExportError, match="qreg"):
        parse_qasm("OPENQASM 2.0;\nh q[0];\n")
    assert parse_qasm("qreg q[1];\nrz(pi/2) q[0];\n").ops[0].angle == pytest.approx(np.pi / 2)


# --- dialects -----------------------------------------------------------------------

def test_cnot_labels_differ():
    c = CircuitDag(2, (gate("cnot", 0, 1),))
    q = json.loads(export_dialect(c, "qiskit"))
    k = json.loads(export_dialect(c, "cirq"))
    assert q["gates"][0]["gate"] == "cx" and k["gates"][0]["gate"] == "CNOT"
    assert q["gates"][0]["qubits"] == k["gates"][0]["qubits"] == [0, 1]


def test_gate_counts_match(rng):
    c = random_circuit(rng, 3, 30)
    counts = {len(json.loads(export_dialect(c, d))["gates"]) for d in DIALECTS}
    assert counts == {30}


@pytest.mark.parametrize("dialect", sorted(DIALECTS))
def test_dialect_reimport_unitary(dialect, rng):
    for _ in range(10):
        c = random_circuit(rng, 3, 20)
        back, _ = import_dialect(export_dialect(c, dialect))
        assert oracle.phase_distance(oracle.unitary(back), oracle.unitary(c)) < 1e-10


def test_dialect_symbolic_with_store():
    b = toy_bundle()
    doc = json.loads(export_dialect(b.circuit, "pennylane", b.parameters))
    assert doc["gates"][0]["phi"]["symbol"] == "w0"
    back, store = import_dialect(json.dumps(doc))
    assert back.ops == b.circuit.ops
    assert np.array_equal(store.values, b.parameters.values)


def test_unknown_dialect():
    with pytest.raises(ExportError, match="unknown dialect"):
        export_dialect(CircuitDag(1, ()), "quipper")


def test_path_independence(rng):
    b = toy_bundle()
    for i in DIALECTS:
        mid = reimport(b, i)
        for j in DIALECTS:
            assert export_dialect(mid.circuit, j, mid.parameters) == \
                export_dialect(b.circuit, j, b.parameters)


def test_dialect_fidelity(iris_model):
    bundle, xs = iris_model
    for d in DIALECTS:
        rt = roundtrip_fidelity(bundle, d, xs)
        assert rt.fidelity > 0.9999 and rt.max_l1 < 1e-4
    for rt in dialect_paths(bundle, xs).values():
        assert rt.fidelity > 0.9999


def test_truncated_angles_measurably_worse(iris_model):
    bundle, xs = iris_model
    rt = roundtrip_fidelity(bundle, "qiskit", xs, decimals=3)
    assert rt.fidelity < 0.9999 or rt.max_l1 > 1e-4
    assert rt.fidelity < 1.0


def test_fidelity_bounds_and_empty(iris_model):
    bundle, xs = iris_model
    other = bundle.with_circuit(bundle.circuit, ParameterStore(bundle.parameters.values + 1.0))
    before, after = bundle.probabilities(xs), other.probabilities(xs)
    f = 1 - np.abs(before - after).sum(axis=1).mean()
    assert 1 - 2 * 3 <= f < 1
    with pytest.raises(ExportError, match="non-empty"):
        roundtrip_fidelity(bundle, "canonical", np.zeros((0, 4)))

import numpy as np
import pytest

import oracle
from qnnbridge.circuit import CircuitDag, GateKind as G, GateOp, Symbol, gate, pauli
from qnnbridge.encoders import angle_encode
from qnnbridge.gradients import param_shift
from qnnbridge.reproduce import cross_backend_circuit, random_circuit, random_observable
from qnnbridge.simulator import unitary_of
from qnnbridge.transpiler import (BUILTIN_PROFILES, TargetProfile, TranspileError, decompose,
                                  heavy_hex, in_basis, line, octagonal, optimize,
                                  permutation_matrix, respects_coupling, ring, route,
                                  synthesize_1q, transpile, verify, zyz_angles)

PROFILES = sorted(BUILTIN_PROFILES)


def dag(n, *ops):
    return CircuitDag(n, tuple(ops))


def oracle_distance(abstract, compiled):
    """Phase-aligned distance computed with the Kronecker oracle."""
    u = oracle.unitary(compiled.circuit)
    fixed = permutation_matrix(compiled.layout).T @ u @ permutation_matrix(compiled.initial_layout)
    return oracle.phase_distance(fixed, oracle.unitary(abstract))


def connected(edges, n):
    adj = {q: set() for q in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, stack = {0}, [0]
    while stack:
        for w in adj[stack.pop()] - seen:
            seen.add(w)
            stack.append(w)
    return len(seen) == n


# --- decompose ---------------------------------------------------------------

def test_cnot_into_cz_basis_is_h_cz_h():
    out = decompose(dag(2, gate("cnot", 0, 1)), {G.H, G.CZ, G.RZ, G.SX, G.X})
    assert [(op.kind, op.qubits) for op in out.ops] == [
        (G.H, (1,)), (G.CZ, (0, 1)), (G.H, (1,))]
    assert oracle.phase_distance(oracle.unitary(out), oracle.cnot(2, 0, 1)) < 1e-12


def test_in_basis_circuit_unchanged():
    c = dag(2, gate("rz", 0, param=0.3), gate("sx", 1), gate("cnot", 1, 0), gate("x", 0))
    assert decompose(c, BUILTIN_PROFILES["superconducting-hex"].basis).ops == c.ops


def test_h_into_superconducting_basis():
    out = decompose(dag(1, gate("h", 0)), {G.RZ, G.SX, G.X, G.CNOT})
    assert in_basis(out, {G.RZ, G.SX, G.X})
    assert oracle.phase_distance(oracle.unitary(out), oracle.H) < 1e-12


@pytest.mark.parametrize("kind", ["cnot", "cz", "swap", "rzz", "rxx"])
@pytest.mark.parametrize("name", PROFILES)
def test_two_qubit_rewrites(kind, name):
    basis = BUILTIN_PROFILES[name].basis
    op = gate(kind, 1, 0, param=0.7 if kind in ("rzz", "rxx") else None)
    c = dag(2, op)
    out = decompose(c, basis)
    assert in_basis(out, basis)
    assert oracle.phase_distance(oracle.unitary(out), oracle.unitary(c)) < 1e-10


@pytest.mark.parametrize("name", PROFILES)
def test_random_two_qubit_circuits(name, rng):
    basis = BUILTIN_PROFILES[name].basis
    for _ in range(20):
        c = random_circuit(rng, 2, 12)
        out = decompose(c, basis)
        assert in_basis(out, basis)
        assert oracle.phase_distance(oracle.unitary(out), oracle.unitary(c)) < 1e-9


def test_zyz_reconstructs(rng):
    for _ in range(20):
        a, b, c, d = rng.uniform(-np.pi, np.pi, 4)
        u = np.exp(1j * d) * (oracle.expm(-0.5j * a * oracle.Z) @ oracle.expm(-0.5j * b * oracle.Y)
                             @ oracle.expm(-0.5j * c * oracle.Z))
        synth = dag(1, *synthesize_1q(u, 0, frozenset({G.RY, G.RZ})))
        assert oracle.phase_distance(oracle.unitary(synth), u) < 1e-10
        assert len(zyz_angles(u)) == 4


def test_symbols_survive_decompose():
    c = dag(2, gate("rzz", 0, 1, param=Symbol(0)), gate("ry", 1, param=Symbol(1)))
    out = decompose(c, BUILTIN_PROFILES["octagonal"].basis)
    assert out.symbols == [0, 1]


def test_non_universal_basis_rejected():
    with pytest.raises(TranspileError, match="entangler"):
        decompose(dag(1, gate("h", 0)), {G.RZ, G.RY})
    with pytest.raises(TranspileError, match="1-qubit"):
        TargetProfile("bad", {G.RZ, G.CNOT})


# --- route --------------------------------------------------------------------

def test_all_to_all_no_swaps():
    c = dag(3, gate("cnot", 0, 2), gate("cz", 2, 1))
    out = route(c, ())
    assert out.report.swap_count == 0
    assert out.layout == (0, 1, 2)


def test_line_cnot_0_2_one_swap():
    c = dag(3, gate("cnot", 0, 2))
    out = route(c, line(3))
    assert out.report.swap_count == 1
    assert [op.kind for op in out.circuit.ops] == [G.SWAP, G.CNOT]
    assert respects_coupling(out.circuit, line(3))
    assert oracle_distance(c, out) < 1e-12


def test_ring_circuit_on_ring():
    c = dag(5, *(gate("cnot", j, (j + 1) % 5) for j in range(5)))
    assert route(c, ring(5)).report.swap_count == 0


def test_bad_layout_and_disconnected():
    c = dag(3, gate("cnot", 0, 2))
    with pytest.raises(TranspileError, match="permutation"):
        route(c, line(3), initial_layout=(0, 0, 1))
    with pytest.raises(TranspileError, match="disconnected"):
        route(c, {(0, 1)})


def test_routing_validity(rng):
    for name in ("superconducting-hex", "octagonal"):
        prof = BUILTIN_PROFILES[name]
        for _ in range(20):
            n = int(rng.integers(2, 6))
            out = transpile(random_circuit(rng, n, 15), prof)
            assert respects_coupling(out.circuit, prof.coupling_map)
            assert in_basis(out.circuit, prof.basis)


# --- optimize -----------------------------------------------------------------

def test_rz_merge():
    out = optimize(dag(1, gate("rz", 0, param=0.2), gate("rz", 0, param=0.5)))
    assert len(out.ops) == 1 and out.ops[0].kind is G.RZ
    assert out.ops[0].angle == pytest.approx(0.7)


def test_hh_removed():
    assert optimize(dag(1, gate("h", 0), gate("h", 0))).ops == ()


def test_zero_mod_4pi_removed():
    c = dag(2, gate("rx", 0, param=4 * np.pi), gate("rzz", 0, 1, param=-8 * np.pi))
    assert optimize(c).ops == ()


def test_cancel_through_neighbours_blocked():
    c = dag(2, gate("cnot", 0, 1), gate("h", 1), gate("cnot", 0, 1))
    assert len(optimize(c).ops) == 3


def test_symmetric_cz_cancels():
    assert optimize(dag(2, gate("cz", 0, 1), gate("cz", 1, 0))).ops == ()


def test_optimize_preserves_unitary_and_is_idempotent(rng):
    for _ in range(30):
        c = random_circuit(rng, 3, 25)
        once = optimize(c)
        assert oracle.phase_distance(oracle.unitary(once), oracle.unitary(c)) < 1e-10
        assert optimize(once).ops == once.ops


# --- verify -------------------------------------------------------------------

def test_verify_identity_and_phase():
    c = cross_backend_circuit().bind([0.1, 0.2, 0.3, 0.4])
    assert verify(c, c).residual == pytest.approx(0, abs=1e-14)
    shifted = dag(2, GateOp(G.GPHASE, (), 1.3), *c.ops)
    assert verify(c, shifted).equivalent


def test_verify_detects_perturbation():
    c = cross_backend_circuit().bind([0.1, 0.2, 0.3, 0.4])
    ops = list(c.ops)
    ops[0] = gate("ry", 0, param=0.1 + 1e-3)
    check = verify(c, dag(2, *ops))
    assert not check.equivalent
    assert check.residual > 1e-4


def test_verify_rejects_width_mismatch():
    with pytest.raises(TranspileError):
        verify(dag(1, gate("h", 0)), dag(2, gate("h", 0)))


# --- transpile ----------------------------------------------------------------

@pytest.mark.parametrize("name", PROFILES)
def test_angle_encode_all_profiles(name):
    c = angle_encode([0.3, -1.2, 2.0])
    out = transpile(c, BUILTIN_PROFILES[name])
    assert out.report.verification_residual < 1e-9
    assert oracle_distance(c, out) < 1e-9


@pytest.mark.parametrize("name", PROFILES)
def test_semantic_preservation_vs_oracle(name, rng):
    prof = BUILTIN_PROFILES[name]
    for _ in range(15):
        n = int(rng.integers(1, 5))
        c = random_circuit(rng, n, int(rng.integers(1, 21)))
        out = transpile(c, prof)
        assert oracle_distance(c, out) < 1e-9 * 2 ** (n / 2)


def test_too_many_qubits():
    c = dag(9, gate("h", 8))
    with pytest.raises(TranspileError, match="has 8"):
        transpile(c, BUILTIN_PROFILES["octagonal"])


def test_cross_backend_gradients_identical():
    c = cross_backend_circuit()
    theta = np.full(4, np.pi / 4)
    obs = pauli("ZI")
    ref = param_shift(c, theta, obs).g
    for name in PROFILES:
        out = transpile(c, BUILTIN_PROFILES[name])
        g = param_shift(out.circuit, theta, out.map_observable(obs)).g
        assert np.abs(g - ref).max() < 1e-10


def test_gradient_invariance_random(rng):
    for name in PROFILES:
        for _ in range(5):
            n = int(rng.integers(2, 4))
            c = random_circuit(rng, n, 10, symbolic=True)
            if not c.symbols:
                continue
            p = max(c.symbols) + 1
            theta = rng.uniform(-np.pi, np.pi, p)
            obs = random_observable(rng, n)
            out = transpile(c, BUILTIN_PROFILES[name])
            ref = param_shift(c, theta, obs).g
            g = param_shift(out.circuit, theta, out.map_observable(obs)).g
            assert np.abs(g - ref).max() < 1e-10


# --- profiles and topologies --------------------------------------------------

def test_builtin_profiles():
    assert {p: BUILTIN_PROFILES[p].max_qubits for p in PROFILES} == {
        "ion-all2all": 11, "octagonal": 8, "superconducting-hex": 12}
    assert BUILTIN_PROFILES["ion-all2all"].all_to_all
    assert BUILTIN_PROFILES["octagonal"].coupling_map == ring(8)


def test_profile_dict_round_trip():
    for p in BUILTIN_PROFILES.values():
        again = TargetProfile.from_dict(p.to_dict())
        assert again == p


@pytest.mark.parametrize("n", range(2, 30))
def test_heavy_hex_prefixes_connected(n):
    edges = heavy_hex(n)
    assert connected(edges, n)
    degree = np.bincount([q for e in edges for q in e], minlength=n)
    assert degree.max() <= 3


def test_octagonal_chain():
    edges = octagonal(16)
    assert connected(edges, 16)
    assert len(edges) == 8 + 8 + 2

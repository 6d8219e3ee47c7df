import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

import oracle
from qnnbridge.circuit import Bound, CircuitDag, GateKind as G, GateOp
from qnnbridge.encoders import (EncodingConfig, EncodingError, amplitude_encode, angle_encode,
                                dense_angle_encode, iqp_encode, ring_pairs, truncate_amplitudes,
                                verify_encoding_equivalence)
from qnnbridge.simulator import evolve
from qnnbridge.transpiler import BUILTIN_PROFILES, TargetProfile, transpile, verify


def state(c):
    return evolve(c).amplitudes


# --- amplitude ---------------------------------------------------------------------------

def test_amplitude_examples():
    assert np.allclose(state(amplitude_encode([1, 0, 0, 0])), [1, 0, 0, 0])
    assert np.allclose(state(amplitude_encode([1, 1, 1, 1])), [0.5] * 4)
    assert np.allclose(state(amplitude_encode([1, -1])), [2 ** -0.5, -(2 ** -0.5)])


def test_amplitude_uses_multiplexed_ry_only():
    c = amplitude_encode(np.arange(1.0, 9.0))
    assert {op.kind for op in c.ops} <= {G.RY, G.CNOT, G.GPHASE}
    assert c.n_qubits == 3


def test_amplitude_zero_pads():
    out = state(amplitude_encode([3, 4, 0]))
    assert np.allclose(out, [0.6, 0.8, 0, 0])
    assert amplitude_encode([1, 2, 3, 4, 5]).n_qubits == 3


def test_amplitude_errors():
    with pytest.raises(EncodingError, match="non-zero"):
        amplitude_encode([0, 0])
    with pytest.raises(EncodingError):
        amplitude_encode([])
    with pytest.raises(EncodingError):
        amplitude_encode([1, np.inf])


@given(st.integers(1, 5), st.integers(0, 2 ** 31))
def test_amplitude_exact_with_signs(n, seed):
    x = np.random.default_rng(seed).normal(size=2 ** n)
    assert np.abs(state(amplitude_encode(x)) - x / np.linalg.norm(x)).max() < 1e-10


def test_amplitude_truncation_bound(rng):
    for _ in range(500):
        n = int(rng.integers(1, 6))
        x = rng.normal(size=2 ** n) * rng.exponential(size=2 ** n) ** 2
        target = x / np.linalg.norm(x)
        for eps in (0.0, 0.01, 0.1):
            built = state(amplitude_encode(x, eps))
            assert np.linalg.norm(target - built) <= eps + 1e-12
            assert abs(np.vdot(target, built)) >= 1 - eps ** 2 / 2 - 1e-12


def test_truncation_drops_small_entries():
    v = truncate_amplitudes([10, 0.01, 0, 5], 0.01)
    assert v[1] == 0 and v[0] > 0 and v[3] > 0
    assert np.count_nonzero(truncate_amplitudes([1, 1e-9], 0.5)) == 1
    with pytest.raises(EncodingError):
        truncate_amplitudes([1, 2], 1.0)


# --- angle / dense -------------------------------------------------------------------------

def test_angle_examples():
    assert np.allclose(state(angle_encode([0, 0])), [1, 0, 0, 0])
    assert np.allclose(state(angle_encode([np.pi], "Y")), [0, 1])
    assert np.allclose(state(angle_encode([np.pi / 2])), [np.cos(np.pi / 4), np.sin(np.pi / 4)])
    with pytest.raises(EncodingError):
        angle_encode([])
    with pytest.raises(EncodingError):
        angle_encode([1.0], "w")


def _entropy(psi, cut, n):
    m = psi.reshape(2 ** (n - cut), 2 ** cut)  # low bits = qubits 0..cut-1
    s = np.linalg.svd(m, compute_uv=False) ** 2
    s = s[s > 1e-15]
    return float(-(s * np.log(s)).sum())


@given(st.integers(2, 5), st.sampled_from("xyz"), st.integers(0, 2 ** 31))
def test_angle_is_product_state(n, axis, seed):
    x = np.random.default_rng(seed).uniform(-np.pi, np.pi, n)
    psi = state(angle_encode(x, axis))
    for cut in range(1, n):
        assert _entropy(psi, cut, n) < 1e-10
    assert len(angle_encode(x, axis)) == n  # depth one


def test_dense_examples():
    assert abs(abs(state(dense_angle_encode([0, 0]))[0]) - 1) < 1e-12
    assert np.allclose(np.abs(state(dense_angle_encode([np.pi, 0]))), [0, 1])
    a, b = np.pi / 2, np.pi / 3
    ref = expm(-0.5j * b * oracle.Z) @ expm(-0.5j * a * oracle.Y) @ np.array([1, 0])
    assert np.allclose(state(dense_angle_encode([a, b])), ref)
    with pytest.raises(EncodingError, match="even"):
        dense_angle_encode([1, 2, 3])


# --- IQP -----------------------------------------------------------------------------------

def _iqp_oracle(x, pairs, r):
    n = len(x)
    hs = oracle.on(n, {q: oracle.H for q in range(n)})
    z1 = sum(x[j] * oracle.one(n, j, oracle.Z) for j in range(n))
    zz = sum(x[a] * x[b] * oracle.on(n, {a: oracle.Z, b: oracle.Z}) for a, b in pairs)
    czs = np.eye(2 ** n)
    for a, b in pairs:
        czs = oracle.cz(n, a, b) @ czs
    block = czs @ expm(1j * zz) @ expm(1j * z1) @ hs
    u = np.linalg.matrix_power(block, r)
    return u[:, 0]


def test_iqp_zero_features():
    psi = state(iqp_encode([0, 0], [(0, 1)]))
    assert np.allclose(psi, oracle.cz(2, 0, 1) @ np.full(4, 0.5))


def test_iqp_matches_matrix_exponentials():
    x = [0.5, 0.3]
    assert oracle.phase_distance(state(iqp_encode(x, [(0, 1)])), _iqp_oracle(x, [(0, 1)], 1)) < 1e-12


@given(st.integers(2, 4), st.integers(1, 3), st.integers(0, 2 ** 31))
def test_iqp_oracle_random(n, r, seed):
    x = np.random.default_rng(seed).uniform(-np.pi, np.pi, n)
    pairs = ring_pairs(n)
    assert oracle.phase_distance(state(iqp_encode(x, None, r)), _iqp_oracle(x, pairs, r)) < 1e-10


def test_iqp_repetition_scales_op_count():
    x = [0.1, 0.2, 0.3]
    one, two = iqp_encode(x, repetitions=1), iqp_encode(x, repetitions=2)
    assert len(two) == 2 * len(one)


def test_iqp_cz_follows_phase():
    ops = iqp_encode([0.1, 0.2], [(0, 1)]).ops
    assert [op.kind for op in ops[-2:]] == [G.RZZ, G.CZ]


def test_iqp_pair_validation():
    with pytest.raises(EncodingError):
        iqp_encode([1, 2], [(0, 2)])
    with pytest.raises(EncodingError):
        iqp_encode([1, 2, 3], [(0, 1), (1, 0)])
    with pytest.raises(EncodingError):
        iqp_encode([1, 2], repetitions=0)
    assert ring_pairs(3) == [(0, 1), (1, 2), (2, 0)]


def test_qubit_accounting():
    assert amplitude_encode(np.ones(16)).n_qubits == 4
    assert angle_encode(np.ones(4)).n_qubits == 4
    assert iqp_encode(np.ones(4)).n_qubits == 4
    assert dense_angle_encode(np.ones(4)).n_qubits == 2


# --- config and equivalence ---------------------------------------------------------------

@pytest.mark.parametrize("config,dim", [
    (EncodingConfig("amplitude", epsilon=0.05), 8), (EncodingConfig("angle", axis="x"), 3),
    (EncodingConfig("angle", axis="z"), 3), (EncodingConfig("dense_angle"), 4),
    (EncodingConfig("iqp", repetitions=2), 3)])
def test_closed_form_states_match_circuits(config, dim, rng):
    xs = rng.uniform(-np.pi, np.pi, (4, dim))
    batch = config.states(xs)
    for x, psi in zip(xs, batch):
        assert np.allclose(psi, state(config.circuit(x)), atol=1e-12)
    assert EncodingConfig.from_dict(config.to_dict()) == config


def test_config_validation():
    with pytest.raises(EncodingError):
        EncodingConfig("fourier")
    with pytest.raises(EncodingError):
        EncodingConfig("iqp", repetitions=0)
    with pytest.raises(EncodingError):
        EncodingConfig("amplitude", epsilon=1.5)
    assert EncodingConfig("DenseAngle").kind == "dense_angle"


def test_equivalence_identity_target():
    ident = TargetProfile("native", {"rx", "ry", "rz", "cnot", "cz", "h", "s", "t", "rzz"}, (), 8)
    r = verify_encoding_equivalence(EncodingConfig("angle"), [0.3, 0.4], ident)
    assert r.passed and r.residual < 1e-12


def test_equivalence_cz_basis():
    r = verify_encoding_equivalence(EncodingConfig("angle"), [0.3, -1.1, 2.0], BUILTIN_PROFILES["octagonal"])
    assert r.residual < 1e-10


def test_equivalence_detects_corruption():
    x = [0.3, -1.1]
    source = angle_encode(x)
    compiled = transpile(source, BUILTIN_PROFILES["octagonal"])
    ops = list(compiled.circuit.ops)
    i = next(k for k, op in enumerate(ops) if op.kind.parametric and op.kind is not G.GPHASE)
    ops[i] = GateOp(ops[i].kind, ops[i].qubits, Bound(ops[i].angle + 0.1))
    bad = CircuitDag(compiled.circuit.n_qubits, tuple(ops))
    assert not verify(source, bad).equivalent


@pytest.mark.parametrize("profile", sorted(BUILTIN_PROFILES))
@pytest.mark.parametrize("kind", ["amplitude", "angle", "dense_angle", "iqp"])
def test_equivalence_every_encoder_and_profile(kind, profile, rng):
    for _ in range(5):
        n = int(rng.integers(1, 5))
        dim = {"amplitude": 2 ** n, "dense_angle": 2 * n}.get(kind, n)
        x = rng.uniform(-np.pi, np.pi, dim)
        r = verify_encoding_equivalence(EncodingConfig(kind), x, BUILTIN_PROFILES[profile], 1e-8)
        assert r.passed, r

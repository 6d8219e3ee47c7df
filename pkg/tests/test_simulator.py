import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracle
from qnnbridge.circuit import (BasisProjector, CircuitDag, CircuitError, GateKind as G, GateOp,
                               PauliSum, Symbol, gate, pauli)
from qnnbridge.reproduce import cross_backend_circuit, random_circuit, random_observable
from qnnbridge.simulator import (NoiseModel, ShotCounts, evolve, evolve_batch, expectation,
                                 expectation_batch, noisy_expectation, noisy_sample, sample,
                                 unitary_of)

R2 = 1 / np.sqrt(2)


def test_textbook_states():
    assert np.allclose(evolve(CircuitDag(1, (gate("h", 0),))).amplitudes, [R2, R2])
    assert np.allclose(evolve(CircuitDag(1, (gate("ry", 0, param=np.pi),))).amplitudes, [0, 1])
    bell = evolve(CircuitDag(2, (gate("h", 0), gate("cnot", 0, 1)))).amplitudes
    assert np.allclose(bell, [R2, 0, 0, R2])


def test_little_endian_convention():
    # X on qubit 1 of 3 sets bit 1 of the basis index
    psi = evolve(CircuitDag(3, (gate("x", 1),))).amplitudes
    assert np.argmax(np.abs(psi)) == 2
    assert expectation(evolve(CircuitDag(3, (gate("x", 1),))), pauli("IZI")) == pytest.approx(-1)


def test_expectation_examples():
    assert expectation(evolve(CircuitDag(1)), pauli("Z")) == 1.0
    bell = evolve(CircuitDag(2, (gate("h", 0), gate("cnot", 0, 1))))
    assert expectation(bell, pauli("ZI")) == pytest.approx(0, abs=1e-15)
    assert expectation(evolve(CircuitDag(4)), BasisProjector("0000")) == 1.0


def test_dimension_mismatch():
    with pytest.raises(CircuitError):
        expectation(evolve(CircuitDag(2)), pauli("Z"))


def test_unbound_parameter_rejected():
    c = CircuitDag(1, (gate("rx", 0, param=Symbol(0)),))
    with pytest.raises(CircuitError):
        evolve(c)
    with pytest.raises(CircuitError):
        unitary_of(c)


def test_unitary_examples():
    assert np.allclose(unitary_of(CircuitDag(2)), np.eye(4))
    assert np.allclose(unitary_of(CircuitDag(1, (gate("x", 0),))), [[0, 1], [1, 0]])
    hczh = unitary_of(CircuitDag(2, (gate("h", 1), gate("cz", 0, 1), gate("h", 1))))
    assert np.abs(hczh - oracle.cnot(2, 0, 1)).max() < 1e-12


def test_unitary_size_guard():
    with pytest.raises(CircuitError):
        unitary_of(CircuitDag(11))


@given(st.integers(1, 4), st.integers(0, 25), st.integers(0, 2 ** 31))
def test_unitary_matches_kron_oracle(n, n_ops, seed):
    c = random_circuit(np.random.default_rng(seed), n, n_ops)
    c = c.append(GateOp(G.GPHASE, (), 0.37))
    assert np.abs(unitary_of(c) - oracle.unitary(c)).max() < 1e-12


def test_norm_and_unitarity_random(rng):
    for _ in range(200):
        n = int(rng.integers(1, 9))
        c = random_circuit(rng, n, int(rng.integers(0, 40)))
        assert abs(np.linalg.norm(evolve(c).amplitudes) - 1) < 1e-10
        if n <= 5:
            u = unitary_of(c)
            assert np.linalg.norm(u.conj().T @ u - np.eye(2 ** n)) < 1e-9


@given(st.integers(1, 5), st.integers(0, 2 ** 31))
def test_compositionality(n, seed):
    rng = np.random.default_rng(seed)
    c1, c2 = random_circuit(rng, n, 10), random_circuit(rng, n, 10)
    assert np.allclose(evolve(c1 + c2).amplitudes, evolve(c2, evolve(c1)).amplitudes, atol=1e-12)


@given(st.integers(1, 5), st.integers(0, 2 ** 31))
def test_linearity_and_oracle_expectation(n, seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, n, 15)
    obs = random_observable(rng, n)
    psi = evolve(c)
    if isinstance(obs, PauliSum):
        parts = sum(coef * expectation(psi, pauli(s)) for coef, s in obs.terms)
        assert expectation(psi, obs) == pytest.approx(parts, abs=1e-12)
    assert expectation(psi, obs) == pytest.approx(oracle.expval(c, obs), abs=1e-12)


def test_batch_matches_single(rng):
    c = random_circuit(rng, 3, 20)
    states = rng.normal(size=(5, 8)) + 1j * rng.normal(size=(5, 8))
    states /= np.linalg.norm(states, axis=1, keepdims=True)
    out = evolve_batch(c, states)
    obs = pauli("ZXY")
    for b in range(5):
        assert np.allclose(out[b], evolve(c, states[b]).amplitudes)
        assert expectation_batch(out, obs)[b] == pytest.approx(expectation(evolve(c, states[b]), obs))


def test_sampling_examples():
    one = evolve(CircuitDag(1, (gate("x", 0),)))
    assert sample(one, 100, seed=0).counts == {"1": 100}
    plus = evolve(CircuitDag(1, (gate("h", 0),)))
    k = sample(plus, 8192, seed=3)
    bound = 3 * np.sqrt(8192 * 0.25)
    assert abs(k.counts["0"] - 4096) <= bound and k.shots == 8192
    flipped = sample(evolve(CircuitDag(1)), 100_000, NoiseModel(eps_ro=0.5), seed=4)
    assert flipped.frequency("0") == pytest.approx(0.5, abs=0.01)


def test_sample_bitstrings_are_qubit0_first():
    k = sample(evolve(CircuitDag(3, (gate("x", 0),))), 10, seed=0)
    assert k.counts == {"100": 10}


def test_sample_frequencies_converge(rng):
    c = random_circuit(rng, 3, 15)
    psi = evolve(c)
    k = sample(psi, 10 ** 6, seed=11)
    freq = np.array([k.frequency(format(i, "03b")[::-1]) for i in range(8)])
    assert np.abs(freq - psi.probabilities).max() < 5e-3


def test_shot_counts_invariant():
    with pytest.raises(ValueError):
        ShotCounts({"0": 3}, 4)
    with pytest.raises(ValueError):
        sample(evolve(CircuitDag(1)), 0)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(eps_2q=0.6)
    with pytest.raises(ValueError):
        NoiseModel(eps_ro=-0.1)


def test_noiseless_exact_mode_equals_expectation(rng):
    for _ in range(10):
        c = random_circuit(rng, 3, 20)
        obs = random_observable(rng, 3)
        assert noisy_expectation(c, obs, NoiseModel(), None) == pytest.approx(
            expectation(evolve(c), obs), abs=1e-12)


def test_depth0_readout_closed_form():
    # each qubit reads 1 with probability eps: <Z_q> = 1 - 2 eps, P(000) = (1 - eps)^3
    eps = 0.07
    noise = NoiseModel(0.2, 0.3, eps)
    c = CircuitDag(3)
    assert noisy_expectation(c, pauli("ZII"), noise, None) == pytest.approx(1 - 2 * eps)
    assert noisy_expectation(c, pauli("ZZI"), noise, None) == pytest.approx((1 - 2 * eps) ** 2)
    assert noisy_expectation(c, BasisProjector("000"), noise, None) == pytest.approx((1 - eps) ** 3)


def test_depolarizing_matches_channel_algebra():
    # X then depolarize: two of the three Paulis flip Z, so <Z> = -(1 - 4p/3)
    p = 0.1
    c = CircuitDag(1, (gate("x", 0),))
    got = noisy_expectation(c, pauli("Z"), NoiseModel(eps_1q=p), None, seed=5, trajectories=200_000)
    assert got == pytest.approx(-(1 - 4 * p / 3), abs=5 * np.sqrt(1 / 200_000))
    # CNOT then 2q depolarizing: 8 of 15 Paulis anticommute with ZI
    c2 = CircuitDag(2, (gate("cnot", 0, 1),))
    got = noisy_expectation(c2, pauli("ZI"), NoiseModel(eps_2q=p), None, seed=6, trajectories=200_000)
    assert got == pytest.approx(1 - 16 * p / 15, abs=5 * np.sqrt(1 / 200_000))


def test_shot_noise_scale():
    c = CircuitDag(1, (gate("h", 0),))
    vals = [noisy_expectation(c, pauli("Z"), None, 8192, seed=s) for s in range(200)]
    assert np.std(vals) == pytest.approx(1 / np.sqrt(8192), rel=0.2)


def test_noisy_runs_are_deterministic_per_seed():
    c = cross_backend_circuit().bind([0.3, 0.5, 0.7, 0.9])
    noise = NoiseModel(0.001, 0.012, 0.008)
    a = noisy_expectation(c, pauli("ZI"), noise, 4096, seed=9)
    assert a == noisy_expectation(c, pauli("ZI"), noise, 4096, seed=9)
    assert noisy_sample(c, 500, noise, seed=2) == noisy_sample(c, 500, noise, seed=2)
    assert noisy_sample(c, 500, noise, seed=2).shots == 500

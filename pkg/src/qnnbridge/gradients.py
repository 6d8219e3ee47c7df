"""Gradient strategies for expectation values of parameterized circuits.

An executor is any callable ``(bound_circuit, observable) -> float``. It must
be reentrant because shifted evaluations may run concurrently.
"""
from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Protocol, Sequence

import numpy as np

from .circuit import (Bound, CircuitDag, CircuitError, GateKind, GateOp, Observable,
                      ParameterStore, ROTATIONS)
from .simulator import (GENERATORS, NoiseModel, _as_flat, _as_tensor, apply_matrix,
                        apply_observable, evolve, expectation, gate_matrix, noisy_expectation,
                        run_ops)

SHIFT = np.pi / 2


class GradientError(CircuitError):
    pass


class Executor(Protocol):
    def __call__(self, circuit: CircuitDag, obs: Observable) -> float: ...


def exact_executor(circuit: CircuitDag, obs: Observable) -> float:
    return expectation(evolve(circuit), obs)


class ShotExecutor:
    """Sampled (optionally noisy) expectation values with reproducible seeds.

    Each call draws a fresh child seed, so the sequence of results depends only
    on ``seed`` and the call order.
    """

    def __init__(self, shots: int, noise: NoiseModel | None = None, seed: int = 0):
        if shots < 1:
            raise GradientError("shots must be positive")
        self.shots = shots
        self.noise = noise
        self._seeds = np.random.SeedSequence(seed)
        self._lock = threading.Lock()

    def __call__(self, circuit: CircuitDag, obs: Observable) -> float:
        with self._lock:
            child = self._seeds.spawn(1)[0]
        return noisy_expectation(circuit, obs, self.noise, shots=self.shots,
                                 seed=int(child.generate_state(1)[0]))


class Strategy(str, Enum):
    PARAM_SHIFT = "param_shift"
    FINITE_DIFF = "finite_diff"
    ADJOINT = "adjoint"


@dataclass(frozen=True)
class GradientResult:
    g: np.ndarray
    evaluations: int


def _values(store: ParameterStore | Sequence[float]) -> np.ndarray:
    if isinstance(store, ParameterStore):
        return store.values
    return np.asarray(store, dtype=float).reshape(-1)


def _bound_ops(circuit: CircuitDag, values: np.ndarray) -> tuple[list[GateOp], dict[int, list[int]]]:
    """Bound op list plus, per symbol, the positions where it occurs."""
    ops, where = [], {}
    for i, op in enumerate(circuit.ops):
        if op.is_symbolic:
            j = op.param.index
            if j >= values.size:
                raise CircuitError(
                    f"symbol {j} unresolved: parameter store has {values.size} entries")
            if op.kind not in ROTATIONS:
                raise GradientError(f"parameter {j} sits on non-shiftable gate {op.kind.value}")
            where.setdefault(j, []).append(i)
            op = GateOp(op.kind, op.qubits, Bound(float(values[j])))
        ops.append(op)
    return ops, where


def _shifted(circuit, ops, i, delta) -> CircuitDag:
    op = ops[i]
    out = list(ops)
    out[i] = GateOp(op.kind, op.qubits, Bound(op.angle + delta))
    return CircuitDag(circuit.n_qubits, tuple(out), circuit.name)


def _run_all(executor, circuits, obs, max_workers):
    if max_workers and max_workers > 1 and len(circuits) > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            return list(pool.map(lambda c: float(executor(c, obs)), circuits))
    return [float(executor(c, obs)) for c in circuits]


def param_shift(circuit: CircuitDag, store, obs: Observable,
                executor: Executor = exact_executor, max_workers: int | None = None) -> GradientResult:
    """Two-point shift rule, summed over every occurrence of each symbol.

    Symbols the circuit never uses get an exact zero without any executions.
    """
    values = _values(store)
    ops, where = _bound_ops(circuit, values)
    jobs, owners = [], []
    for j in sorted(where):
        for i in where[j]:
            jobs += [_shifted(circuit, ops, i, SHIFT), _shifted(circuit, ops, i, -SHIFT)]
            owners.append(j)
    f = _run_all(executor, jobs, obs, max_workers)
    g = np.zeros(values.size)
    for k, j in enumerate(owners):
        g[j] += (f[2 * k] - f[2 * k + 1]) / 2
    return GradientResult(g, len(jobs))


def finite_diff(circuit: CircuitDag, store, obs: Observable, step: float = 1e-6,
                executor: Executor = exact_executor, central: bool = False,
                max_workers: int | None = None) -> GradientResult:
    """Forward differences (p + 1 evaluations); ``central=True`` uses 2p."""
    if not step > 0:
        raise GradientError(f"finite-difference step must be positive, got {step}")
    values = _values(store)
    p = values.size

    def at(v):
        return circuit.bind(v)

    if central:
        jobs = []
        for j in range(p):
            e = np.zeros(p)
            e[j] = step
            jobs += [at(values + e), at(values - e)]
        f = _run_all(executor, jobs, obs, max_workers)
        g = np.array([(f[2 * j] - f[2 * j + 1]) / (2 * step) for j in range(p)])
        return GradientResult(g, len(jobs))
    jobs = [at(values)] + [at(values + step * np.eye(p)[j]) for j in range(p)]
    f = _run_all(executor, jobs, obs, max_workers)
    g = np.array([(f[j + 1] - f[0]) / step for j in range(p)])
    return GradientResult(g, len(jobs))


def adjoint_batch(circuit: CircuitDag, values, initial: np.ndarray,
                  project: Callable[[np.ndarray], np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample adjoint gradients for a batch of input states.

    ``project`` maps final states (B, 2**n) to ``O_b |psi_b>``. Returns the
    final states and a (B, p) array of gradients of ``<psi_b|O_b|psi_b>``.
    """
    values = _values(values)
    ops, _ = _bound_ops(circuit, values)
    n = circuit.n_qubits
    psi = run_ops(_as_tensor(np.asarray(initial, dtype=complex), n), ops, n)
    final = _as_flat(psi)
    lam = _as_tensor(project(final), n)
    grads = np.zeros((final.shape[0], values.size))
    for src, op in zip(reversed(circuit.ops), reversed(ops)):
        if src.is_symbolic:
            gpsi = apply_matrix(psi, GENERATORS[op.kind], op.qubits, n)
            overlap = np.einsum("bi,bi->b", _as_flat(lam).conj(), _as_flat(gpsi))
            grads[:, src.param.index] += overlap.imag
        u_dag = gate_matrix(op).conj().T
        psi = apply_matrix(psi, u_dag, op.qubits, n)
        lam = apply_matrix(lam, u_dag, op.qubits, n)
    return final, grads


def adjoint_gradient(circuit: CircuitDag, store, obs: Observable,
                     executor: Executor | None = None) -> GradientResult:
    """Exact gradient from one forward and one reverse statevector sweep."""
    if executor is not None and getattr(executor, "shots", None) is not None:
        raise GradientError("adjoint differentiation needs a statevector, not a shot-based executor")
    values = _values(store)
    if not circuit.ops:
        return GradientResult(np.zeros(values.size), 0)
    n = circuit.n_qubits
    _, grads = adjoint_batch(circuit, values, np.eye(1, 2 ** n, dtype=complex),
                             lambda s: apply_observable(s, obs, n))
    return GradientResult(grads[0], 1)


def gradient(circuit: CircuitDag, store, obs: Observable, strategy: Strategy | str = "param_shift",
             executor: Executor | None = None, step: float = 1e-6, **kw) -> GradientResult:
    strategy = Strategy(strategy)
    if strategy is Strategy.ADJOINT:
        return adjoint_gradient(circuit, store, obs, executor)
    executor = executor or exact_executor
    if strategy is Strategy.PARAM_SHIFT:
        return param_shift(circuit, store, obs, executor, **kw)
    return finite_diff(circuit, store, obs, step, executor, **kw)


@dataclass(frozen=True)
class NoiseBudget:
    sigma_shot: float
    sigma_gate: float
    sigma_ro: float
    sigma_total: float


def noise_budget(shots: int, n_cx: int, eps_cx: float, n_qubits: int, eps_ro: float) -> NoiseBudget:
    """Additive error model for a hardware gradient estimate.

    ``sigma_gate`` is a worst-case bias scale (each two-qubit gate perturbs
    both shifted evaluations), not the standard deviation of a sample.
    """
    if shots < 1:
        raise GradientError("shots must be >= 1")
    for name, v in (("eps_cx", eps_cx), ("eps_ro", eps_ro)):
        if not 0 <= v <= 0.5:
            raise GradientError(f"{name} must lie in [0, 0.5], got {v}")
    s_shot = 1 / np.sqrt(shots)
    s_gate = 2 * n_cx * eps_cx
    s_ro = n_qubits * eps_ro
    return NoiseBudget(float(s_shot), float(s_gate), float(s_ro),
                       float(np.sqrt(s_shot ** 2 + s_gate ** 2 + s_ro ** 2)))


__all__ = [
    "Strategy", "GradientResult", "GradientError", "Executor", "ShotExecutor", "NoiseBudget",
    "exact_executor", "param_shift", "finite_diff", "adjoint_gradient", "adjoint_batch",
    "gradient", "noise_budget",
]

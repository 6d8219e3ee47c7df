"""Scripted desk-scale reproductions with tolerances from ``data/reproduction.json``.

Each ``check_*`` function returns a :class:`Check`; ``run`` evaluates a list of
them. The CLI ``reproduce`` command and the acceptance tests both go through
this module, so a tolerance is only ever written down once.
"""
from __future__ import annotations

import functools
import itertools
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .circuit import (CORE_GATES, BasisProjector, CircuitDag, GateKind, GateOp, PauliSum,
                      Symbol, bind, parse_observable)
from .encoders import KINDS, EncodingConfig, truncate_amplitudes, amplitude_encode
from .export import DIALECTS, dialect_paths, roundtrip_fidelity
from .gradients import adjoint_gradient, finite_diff, noise_budget, param_shift
from .hal import backend_executor, load_registry
from .simulator import evolve
from .training import (QuantumLayer, TrainConfig, TrainResult, load_iris, load_mnist4,
                       load_wine, train)
from .transpiler import BUILTIN_PROFILES, in_basis, respects_coupling, transpile, verify

G = GateKind
_DATA = Path(__file__).with_name("data")


def load_tolerances(path: str | Path | None = None) -> dict:
    with open(path or _DATA / "reproduction.json", encoding="utf-8") as fh:
        return json.load(fh)


@dataclass
class Check:
    key: str
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    detail: str = ""
    skipped: bool = False
    seconds: float = 0.0

    @property
    def status(self) -> str:
        return "SKIP" if self.skipped else "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        return f"[{self.status}] {self.key}: {self.title} ({self.detail}; {self.seconds:.1f}s)"

    def to_dict(self) -> dict:
        return {"key": self.key, "title": self.title, "status": self.status,
                "measured": self.measured, "detail": self.detail, "seconds": round(self.seconds, 3)}


# --- fixture circuits -------------------------------------------------------------------

def cross_backend_circuit() -> CircuitDag:
    """Two layers of [Ry, Ry, CNOT(0, 1)] on two qubits, symbols 0..3."""
    ops = []
    for layer in range(2):
        ops += [GateOp(G.RY, (0,), Symbol(2 * layer)), GateOp(G.RY, (1,), Symbol(2 * layer + 1)),
                GateOp(G.CNOT, (0, 1))]
    return CircuitDag(2, tuple(ops), "cross_backend")


def fez_circuit() -> CircuitDag:
    """Ry layer, CNOT chain 0-1-2-3, Ry layer; symbols 0..7."""
    ops = [GateOp(G.RY, (q,), Symbol(q)) for q in range(4)]
    ops += [GateOp(G.CNOT, (q, q + 1)) for q in range(3)]
    ops += [GateOp(G.RY, (q,), Symbol(4 + q)) for q in range(4)]
    return CircuitDag(4, tuple(ops), "ibm_fez")


FIXTURES: dict[str, Callable[[], CircuitDag]] = {
    "cross_backend": cross_backend_circuit,
    "ibm_fez": fez_circuit,
}


_RANDOM_KINDS = sorted(CORE_GATES | {G.X, G.SX, G.SWAP, G.RZZ, G.RXX}, key=lambda k: k.value)


def random_circuit(rng: np.random.Generator, n: int, n_ops: int, symbolic: bool = False,
                   reuse: float = 0.0, kinds=None) -> CircuitDag:
    """Random gate list. Symbolic circuits number their symbols in order of
    first use; with probability ``reuse`` a parametric gate recycles an earlier
    symbol instead."""
    pool = [k for k in (kinds or _RANDOM_KINDS) if k.n_qubits <= n]
    ops, next_symbol = [], 0
    for _ in range(n_ops):
        kind = pool[rng.integers(len(pool))]
        qubits = tuple(int(q) for q in rng.choice(n, kind.n_qubits, replace=False))
        param = None
        if kind.parametric:
            if not symbolic:
                param = float(rng.uniform(-2 * np.pi, 2 * np.pi))
            elif next_symbol and rng.random() < reuse:
                param = Symbol(int(rng.integers(next_symbol)))
            else:
                param = Symbol(next_symbol)
                next_symbol += 1
        ops.append(GateOp(kind, qubits, param))
    return CircuitDag(n, tuple(ops))


def random_observable(rng: np.random.Generator, n: int):
    if rng.random() < 0.2:
        return BasisProjector("".join(rng.choice(list("01"), n)))
    terms = [(float(rng.uniform(-1, 1)), "".join(rng.choice(list("IXYZ"), n)))
             for _ in range(int(rng.integers(1, 4)))]
    return PauliSum(tuple(terms))


# --- checks ------------------------------------------------------------------------------

def _timed(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kw):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        out.seconds = time.perf_counter() - t0
        return out
    return wrapper


@_timed
def check_cross_backend(tol: dict) -> Check:
    cfg = tol["cross_backend"]
    circuit = cross_backend_circuit()
    obs = parse_observable(cfg["observable"])
    theta = np.array(cfg["theta"])
    grads = {"abstract": param_shift(circuit, theta, obs).g}
    for name in cfg["profiles"]:
        compiled = transpile(circuit, BUILTIN_PROFILES[name])
        grads[name] = param_shift(compiled.circuit, theta, compiled.map_observable(obs)).g
    spread = max(float(np.abs(a - b).max()) for a, b in itertools.combinations(grads.values(), 2))
    residual = float(np.abs(grads["abstract"] - np.array(cfg["reference_gradient"])).max())
    return Check("cross-backend", "identical param-shift gradients on every built-in profile",
                 spread < cfg["max_pairwise"],
                 {"gradients": {k: v.tolist() for k, v in grads.items()}, "max_pairwise": spread,
                  "residual_vs_reference": residual},
                 f"max pairwise {spread:.2e} < {cfg['max_pairwise']:g}; "
                 f"distance to reference values {residual:.3f} (informational)")


@_timed
def check_ibm_fez(tol: dict) -> Check:
    cfg = tol["ibm_fez"]
    g = adjoint_gradient(fez_circuit(), np.array(cfg["theta"]), parse_observable(cfg["observable"])).g
    ref = np.array(cfg["reference_gradient"])
    err = np.abs(g[:ref.size] - ref)
    return Check("ibm-fez", "4-qubit simulator gradients", bool(err.max() < cfg["tolerance"]),
                 {"gradient": g[:ref.size].round(6).tolist(), "max_error": float(err.max())},
                 f"max |error| {err.max():.2e} < {cfg['tolerance']:g}")


@_timed
def check_noise_budget(tol: dict) -> Check:
    cfg = tol["noise_budget"]
    b = noise_budget(cfg["shots"], cfg["n_cx"], cfg["eps_cx"], cfg["n_qubits"], cfg["eps_ro"])
    got = {k: getattr(b, k) for k in cfg["reference"]}
    err = max(abs(got[k] - v) for k, v in cfg["reference"].items())
    return Check("noise-budget", "shot/gate/readout error budget", err <= cfg["tolerance"],
                 {k: round(v, 6) for k, v in got.items()},
                 f"max deviation {err:.1e} <= {cfg['tolerance']:g}")


@_timed
def check_noisy_gradient(tol: dict) -> Check:
    """Spread of mock-backend param-shift gradients around the exact ones.

    The statistic is the RMS deviation from the exact gradient, pooled over
    seeds and the listed parameters, which is what a single hardware run's
    |error| estimates.
    """
    cfg, nb = tol["noisy_gradient"], tol["noise_budget"]
    xb = tol["cross_backend"]
    backend = load_registry().get_backend(cfg["backend"])
    circuit = cross_backend_circuit()
    obs = parse_observable(xb["observable"])
    theta = np.array(xb["theta"])
    exact = param_shift(circuit, theta, obs).g
    devs = np.array([param_shift(circuit, theta, obs, backend_executor(backend, cfg["shots"], seed)).g
                     - exact for seed in range(cfg["seeds"])])
    cal = backend.calib
    sigma = noise_budget(cfg["shots"], nb["n_cx"], cal.eps_2q, circuit.n_qubits, cal.eps_ro).sigma_total
    sel = devs[:, cfg["parameters"]]
    rms = float(np.sqrt(np.mean(sel ** 2)))
    lo, hi = sigma / cfg["factor"], sigma * cfg["factor"]
    envelope = float(np.abs(devs).max())
    return Check("noisy-gradient", "mock-backend gradient spread vs error budget",
                 lo <= rms <= hi,
                 {"rms": rms, "sigma_total": sigma, "band": [lo, hi],
                  "mean_deviation": devs.mean(axis=0).tolist(),
                  "std_deviation": devs.std(axis=0, ddof=1).tolist(),
                  "max_abs_deviation": envelope,
                  "within_envelope": envelope < cfg["envelope_sigmas"] * sigma},
                 f"RMS {rms:.4f} vs band [{lo:.4f}, {hi:.4f}]; "
                 f"max |dev| {envelope:.3f} < {cfg['envelope_sigmas']:g} sigma = "
                 f"{cfg['envelope_sigmas'] * sigma:.3f}")


@functools.lru_cache(maxsize=None)
def trained(dataset: str, seed: int) -> TrainResult:
    """Train the benchmark classifier once per (dataset, seed) and cache it."""
    cfg = load_tolerances()["training"]
    data = _load(dataset, seed)
    layer = QuantumLayer.classifier(cfg["qubits"], cfg["layers"], data.n_classes,
                                    EncodingConfig("amplitude") if dataset == "mnist4" else None)
    config = TrainConfig(cfg["epochs"], cfg["batch_size"], seed, cfg["lr"], init_scale=cfg["init_scale"])
    return train(layer, data, config)


def _mnist_files():
    root = os.environ.get("QNNBRIDGE_MNIST_DIR")
    if not root:
        return None
    for suffix in ("", ".gz"):
        images = Path(root, "train-images-idx3-ubyte" + suffix)
        labels = Path(root, "train-labels-idx1-ubyte" + suffix)
        if images.exists() and labels.exists():
            return images, labels
    return None


def _load(dataset: str, seed: int):
    if dataset == "iris":
        return load_iris(seed)
    if dataset == "wine":
        return load_wine(seed)
    if dataset == "mnist4":
        files = _mnist_files()
        if files is None:
            raise FileNotFoundError("set QNNBRIDGE_MNIST_DIR to a directory with the MNIST IDX files")
        return load_mnist4(*files, seed=seed)
    raise ValueError(f"unknown dataset {dataset!r}")


@_timed
def check_roundtrip(tol: dict) -> Check:
    cfg = tol["roundtrip"]
    bundle = trained(cfg["dataset"], cfg["seed"]).bundle
    xs = _load(cfg["dataset"], cfg["seed"]).x_test
    results = {"canonical": roundtrip_fidelity(bundle, "canonical", xs)}
    results.update({d: roundtrip_fidelity(bundle, d, xs) for d in DIALECTS})
    results.update({f"{a}->{b}": r for (a, b), r in dialect_paths(bundle, xs).items()})
    worst_f = min(r.fidelity for r in results.values())
    worst_l1 = max(r.max_l1 for r in results.values())
    ok = worst_f > cfg["min_fidelity"] and worst_l1 < cfg["max_l1"]
    return Check("roundtrip", f"export/re-import through {len(results)} paths", ok,
                 {"min_fidelity": worst_f, "max_l1": worst_l1, "paths": len(results),
                  "test_samples": int(xs.shape[0])},
                 f"min F_RT {worst_f:.6f} > {cfg['min_fidelity']}; max L1 {worst_l1:.1e} < {cfg['max_l1']:g}")


def _check_accuracy(tol: dict, dataset: str) -> Check:
    cfg = tol["training"]
    floor = cfg["min_mean_accuracy"][dataset]
    if dataset == "mnist4" and _mnist_files() is None:
        return Check(dataset, "mean test accuracy", True, {}, "MNIST files not configured", skipped=True)
    accs = [trained(dataset, s).test_accuracy for s in cfg["seeds"]]
    mean, std = float(np.mean(accs)), float(np.std(accs))
    return Check(dataset, f"mean test accuracy over {len(accs)} seeds", mean >= floor,
                 {"accuracies": accs, "mean": mean, "std": std},
                 f"mean {mean:.3f} +/- {std:.3f} >= {floor}")


@_timed
def check_iris(tol: dict) -> Check:
    return _check_accuracy(tol, "iris")


@_timed
def check_wine(tol: dict) -> Check:
    return _check_accuracy(tol, "wine")


@_timed
def check_mnist4(tol: dict) -> Check:
    return _check_accuracy(tol, "mnist4")


@_timed
def check_transpile(tol: dict) -> Check:
    cfg = tol["transpile"]
    rng = np.random.default_rng(cfg["seed"])
    failures, worst, total = [], 0.0, 0
    for i in range(cfg["circuits"]):
        n = int(rng.integers(1, cfg["max_qubits"] + 1))
        circuit = random_circuit(rng, n, int(rng.integers(1, cfg["max_depth"] + 1)))
        for name, profile in BUILTIN_PROFILES.items():
            compiled = transpile(circuit, profile, verify_flag=False)
            v = verify(circuit, compiled, cfg["tolerance"])
            total += 1
            worst = max(worst, v.residual / 2 ** (n / 2))
            structural = in_basis(compiled.circuit, profile.basis) and \
                respects_coupling(compiled.circuit, profile.coupling_map)
            if not (v.equivalent and structural):
                failures.append((i, name, v.residual))
    return Check("transpile", "semantic preservation on random circuits", not failures,
                 {"cases": total, "failures": failures[:5], "worst_scaled_residual": worst},
                 f"{total - len(failures)}/{total} equivalent; worst residual/2^(n/2) {worst:.1e}")


def _random_features(rng, kind: str, n: int) -> tuple[EncodingConfig, np.ndarray]:
    if kind == "amplitude":
        return EncodingConfig("amplitude"), rng.normal(size=2 ** n)
    if kind == "dense_angle":
        return EncodingConfig("dense_angle"), rng.uniform(-np.pi, np.pi, 2 * n)
    if kind == "iqp":
        return EncodingConfig("iqp", repetitions=int(rng.integers(1, 3))), rng.uniform(-np.pi, np.pi, n)
    return EncodingConfig("angle", axis="xyz"[rng.integers(3)]), rng.uniform(-np.pi, np.pi, n)


@_timed
def check_encoding(tol: dict) -> Check:
    from .encoders import verify_encoding_equivalence
    cfg = tol["encoding"]
    rng = np.random.default_rng(cfg["seed"])
    failures, worst, total = [], 0.0, 0
    for kind in KINDS:
        for name, profile in BUILTIN_PROFILES.items():
            for _ in range(cfg["inputs"]):
                config, x = _random_features(rng, kind, int(rng.integers(1, cfg["max_qubits"] + 1)))
                r = verify_encoding_equivalence(config, x, profile, cfg["delta"])
                total += 1
                worst = max(worst, r.residual)
                if not r.passed:
                    failures.append((kind, name, r.residual))
    return Check("encoding", "encoder equivalence across profiles", not failures,
                 {"cases": total, "failures": failures[:5], "worst_residual": worst},
                 f"{total - len(failures)}/{total} below {cfg['delta']:g}; worst {worst:.1e}")


@_timed
def check_gradients(tol: dict) -> Check:
    cfg = tol["gradients"]
    rng = np.random.default_rng(cfg["seed"])
    worst_adj = worst_fd = 0.0
    for _ in range(cfg["circuits"]):
        n = int(rng.integers(1, cfg["max_qubits"] + 1))
        circuit = random_circuit(rng, n, int(rng.integers(1, 25)), symbolic=True, reuse=0.2)
        obs = random_observable(rng, n)
        p = (max(circuit.symbols) + 1) if circuit.symbols else 0
        theta = rng.uniform(-np.pi, np.pi, p + 1)  # one spare, unused entry
        ps = param_shift(circuit, theta, obs).g
        worst_adj = max(worst_adj, float(np.abs(ps - adjoint_gradient(circuit, theta, obs).g).max()))
        fd = finite_diff(circuit, theta, obs, cfg["fd_step"]).g
        worst_fd = max(worst_fd, float(np.abs(ps - fd).max()))
    ok = worst_adj < cfg["adjoint_tol"] and worst_fd < cfg["fd_tol"]
    return Check("gradients", "param-shift vs adjoint vs forward differences", ok,
                 {"max_adjoint_diff": worst_adj, "max_fd_diff": worst_fd},
                 f"adjoint {worst_adj:.1e} < {cfg['adjoint_tol']:g}; "
                 f"finite-diff {worst_fd:.1e} < {cfg['fd_tol']:g}")


@_timed
def check_truncation(tol: dict) -> Check:
    cfg = tol["truncation"]
    rng = np.random.default_rng(cfg["seed"])
    worst, truncated, violations, total = 0.0, 0, 0, 0
    for _ in range(cfg["vectors"]):
        dim = int(rng.integers(2, 2 ** cfg["max_qubits"] + 1))
        # heavy-tailed magnitudes so truncation has something to drop
        x = rng.normal(size=dim) * rng.exponential(size=dim) ** 2
        if not np.any(x):
            continue
        target = truncate_amplitudes(x, 0.0)
        for eps in cfg["epsilons"]:
            built = evolve(amplitude_encode(x, eps)).amplitudes
            err = float(np.linalg.norm(target - built))
            total += 1
            truncated += int(np.count_nonzero(np.abs(built) > 1e-12) < np.count_nonzero(target))
            worst = max(worst, err / eps)
            violations += err > eps
    return Check("truncation", "amplitude truncation error bound", violations == 0,
                 {"cases": total, "truncated": truncated, "worst_error_over_eps": worst},
                 f"{violations} violations in {total}; {truncated} truncated; max err/eps {worst:.3f}")


CHECKS: dict[str, Callable[[dict], Check]] = {
    "cross-backend": check_cross_backend,
    "ibm-fez": check_ibm_fez,
    "noise-budget": check_noise_budget,
    "noisy-gradient": check_noisy_gradient,
    "roundtrip": check_roundtrip,
    "iris": check_iris,
    "wine": check_wine,
    "mnist4": check_mnist4,
    "transpile": check_transpile,
    "encoding": check_encoding,
    "gradients": check_gradients,
    "truncation": check_truncation,
}


def run(names=None, tol: dict | None = None) -> list[Check]:
    tol = tol or load_tolerances()
    names = list(names or CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown reproduction {unknown[0]!r}; choose from {sorted(CHECKS)}")
    return [CHECKS[n](tol) for n in names]


__all__ = ["Check", "CHECKS", "FIXTURES", "run", "load_tolerances", "cross_backend_circuit",
           "fez_circuit", "random_circuit", "random_observable", "trained"]

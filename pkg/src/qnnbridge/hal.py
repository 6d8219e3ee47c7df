"""Backend registry, suitability scoring and a threaded mock job runner."""
from __future__ import annotations

import itertools
import json
import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .circuit import CircuitDag, CircuitError, Observable, counts, interaction_graph
from .simulator import NoiseModel, ShotCounts, noisy_expectation, noisy_sample
from .transpiler import TargetProfile, route, transpile

_DATA = Path(__file__).with_name("data")


class HalError(CircuitError):
    pass


@dataclass(frozen=True)
class Calibration:
    eps_1q: float = 0.0
    eps_2q: float = 0.0
    eps_ro: float = 0.0

    def __post_init__(self):
        for name in ("eps_1q", "eps_2q", "eps_ro"):
            v = getattr(self, name)
            if not 0 <= v <= 0.5:
                raise HalError(f"{name} must lie in [0, 0.5], got {v}")

    def noise(self, seed: int | None = None) -> NoiseModel:
        return NoiseModel(self.eps_1q, self.eps_2q, self.eps_ro, seed)


@dataclass(frozen=True)
class BackendRecord:
    name: str
    provider: str
    device_name: str
    n_qubits: int
    technology: str
    profile: TargetProfile
    calib: Calibration = field(default_factory=Calibration)
    queue_seconds: float = 0.0
    access: str = ""
    authoritative: bool = False

    def __post_init__(self):
        if self.technology not in ("superconducting", "trapped-ion"):
            raise HalError(f"unknown technology {self.technology!r}")
        if self.n_qubits != self.profile.max_qubits:
            raise HalError(f"{self.name}: n_qubits {self.n_qubits} != profile size {self.profile.max_qubits}")
        if self.queue_seconds < 0:
            raise HalError("queue time cannot be negative")

    def with_calibration(self, calib: Calibration) -> BackendRecord:
        return replace(self, calib=calib)


class Registry(dict):
    """Backends keyed by unique name."""

    def fitting(self, n_qubits: int) -> list[BackendRecord]:
        return [b for b in self.values() if b.n_qubits >= n_qubits]

    def get_backend(self, name: str) -> BackendRecord:
        try:
            return self[name]
        except KeyError:
            raise HalError(f"unknown backend {name!r}; known: {', '.join(sorted(self))}") from None


def load_registry(path: str | Path | None = None) -> Registry:
    with open(path or _DATA / "backends.json", encoding="utf-8") as fh:
        spec = json.load(fh)
    families = spec.get("technologies", {})
    reg = Registry()
    for b in spec["backends"]:
        fam = families.get(b.get("family"), {}) if "basis" not in b else b
        profile = TargetProfile.from_dict({
            "name": b["name"], "basis": fam["basis"], "coupling": fam.get("coupling", "all"),
            "max_qubits": b["n_qubits"]})
        if b["name"] in reg:
            raise HalError(f"duplicate backend name {b['name']!r}")
        reg[b["name"]] = BackendRecord(
            b["name"], b["provider"], b["device"], int(b["n_qubits"]), b["technology"], profile,
            Calibration(**b.get("calib", {})), float(b.get("queue_seconds", 0)),
            b.get("access", ""), bool(b.get("authoritative", False)))
    return reg


# --- scoring ------------------------------------------------------------------

@dataclass(frozen=True)
class ScoreWeights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        w = (self.alpha, self.beta, self.gamma)
        if any(v < 0 for v in w) or not any(v > 0 for v in w):
            raise HalError(f"weights must be non-negative and not all zero, got {w}")

    @classmethod
    def parse(cls, text: str) -> ScoreWeights:
        parts = [float(v) for v in text.split(",")]
        if len(parts) != 3:
            raise HalError(f"expected three comma-separated weights, got {text!r}")
        return cls(*parts)

    def scaled(self, k: float) -> ScoreWeights:
        return ScoreWeights(self.alpha * k, self.beta * k, self.gamma * k)


@dataclass(frozen=True)
class ScoreBreakdown:
    score: float
    fidelity: float
    connectivity: float
    queue_norm: float
    swap_estimate: int


def score_breakdown(backend: BackendRecord, circuit: CircuitDag, weights: ScoreWeights) -> ScoreBreakdown:
    if circuit.n_qubits > backend.n_qubits:
        raise HalError(f"circuit needs {circuit.n_qubits} qubits, {backend.name} has {backend.n_qubits}")
    c = counts(circuit)
    edges = backend.profile.coupling_map
    swaps = route(circuit, edges).report.swap_count if edges else 0
    cal = backend.calib
    fid = (1 - cal.eps_1q) ** c.n_1q * (1 - cal.eps_2q) ** (c.n_2q + 3 * swaps)
    ig = interaction_graph(circuit)
    conn = 1.0 if not edges else len(ig & edges) / max(1, len(ig))
    if not ig:
        conn = 1.0
    queue = backend.queue_seconds / 3600
    s = weights.alpha * fid + weights.beta * conn - weights.gamma * queue
    return ScoreBreakdown(float(s), float(fid), float(conn), float(queue), swaps)


def score(backend: BackendRecord, circuit: CircuitDag, weights: ScoreWeights) -> float:
    return score_breakdown(backend, circuit, weights).score


def select_best(registry: Iterable[BackendRecord] | Registry, circuit: CircuitDag,
                weights: ScoreWeights) -> BackendRecord:
    backends = list(registry.values() if isinstance(registry, dict) else registry)
    fits = [b for b in backends if b.n_qubits >= circuit.n_qubits]
    if not fits:
        raise HalError(f"no backend can host {circuit.n_qubits} qubits")
    return min(fits, key=lambda b: (-score(b, circuit, weights), b.n_qubits, b.name))


# --- jobs ---------------------------------------------------------------------

class JobStatus(str, Enum):
    QUEUED = "Queued"
    RUNNING = "Running"
    DONE = "Done"
    FAILED = "Failed"


@dataclass(frozen=True)
class JobRequest:
    """``observable=None`` asks for counts, which needs ``shots``."""

    circuit: CircuitDag
    backend: str
    observable: Observable | None = None
    shots: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.shots is not None and self.shots < 1:
            raise HalError("shots must be positive")
        if self.observable is None and self.shots is None:
            raise HalError("a counts job needs a shot count")


@dataclass(frozen=True)
class Job:
    id: str
    request: JobRequest
    status: JobStatus
    submitted_at: float
    result: float | ShotCounts | None = None
    error: str | None = None
    swap_count: int | None = None


_ORDER = {JobStatus.QUEUED: 0, JobStatus.RUNNING: 1, JobStatus.DONE: 2, JobStatus.FAILED: 2}


def execute(backend: BackendRecord, request: JobRequest) -> tuple[float | ShotCounts, int]:
    """Transpile for the backend and simulate with its calibration as noise."""
    if not request.circuit.is_bound:
        raise HalError("bind all parameters before submitting")
    compiled = transpile(request.circuit, backend.profile, verify_flag=False, seed=request.seed)
    noise = backend.calib.noise(request.seed)
    if request.observable is None:
        raw = noisy_sample(compiled.circuit, request.shots, noise, request.seed)
        mapped = {}
        for bits, k in raw.counts.items():
            key = compiled.map_bits(bits)
            mapped[key] = mapped.get(key, 0) + k
        return ShotCounts(mapped, raw.shots), compiled.report.swap_count
    obs = compiled.map_observable(request.observable)
    value = noisy_expectation(compiled.circuit, obs, noise, request.shots, request.seed)
    return value, compiled.report.swap_count


class ExecutionManager:
    """Thread-safe job table over a worker pool.

    ``submit`` returns at once; ``poll`` returns a snapshot. A completion hook
    passed to ``submit`` runs exactly once, after the job reaches Done or Failed.
    """

    def __init__(self, registry: Registry | None = None, max_workers: int = 4):
        self.registry = registry if registry is not None else load_registry()
        self._pool = ThreadPoolExecutor(max_workers, thread_name_prefix="qnn-job")
        self._lock = threading.Lock()
        self._jobs: dict[str, Job] = {}
        self._futures: dict[str, Future] = {}
        self._ids = itertools.count(1)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()

    def shutdown(self, wait: bool = True):
        self._pool.shutdown(wait=wait)

    def _set(self, job_id: str, **changes) -> Job:
        with self._lock:
            job = self._jobs[job_id]
            new = changes.get("status", job.status)
            if _ORDER[new] < _ORDER[job.status]:
                raise HalError(f"job {job_id} cannot move from {job.status.value} to {new.value}")
            job = replace(job, **changes)
            self._jobs[job_id] = job
            return job

    def submit(self, request: JobRequest, on_complete: Callable[[Job], None] | None = None) -> str:
        backend = self.registry.get_backend(request.backend)
        if request.circuit.n_qubits > backend.n_qubits:
            raise HalError(f"circuit needs {request.circuit.n_qubits} qubits, {backend.name} has {backend.n_qubits}")
        with self._lock:
            job_id = f"job-{next(self._ids):06d}"
            self._jobs[job_id] = Job(job_id, request, JobStatus.QUEUED, time.time())
            self._futures[job_id] = self._pool.submit(self._run, job_id, backend, on_complete)
        return job_id

    def _run(self, job_id, backend, on_complete):
        job = self._set(job_id, status=JobStatus.RUNNING)
        try:
            value, swaps = execute(backend, job.request)
            job = self._set(job_id, status=JobStatus.DONE, result=value, swap_count=swaps)
        except Exception as exc:  # surfaced through the job record
            job = self._set(job_id, status=JobStatus.FAILED, error=f"{type(exc).__name__}: {exc}")
        if on_complete is not None:
            on_complete(job)
        return job

    def poll(self, job_id: str) -> Job:
        with self._lock:
            if job_id not in self._jobs:
                raise HalError(f"unknown job id {job_id!r}")
            return self._jobs[job_id]

    def wait(self, job_id: str, timeout: float | None = None) -> Job:
        with self._lock:
            fut = self._futures.get(job_id)
        if fut is None:
            raise HalError(f"unknown job id {job_id!r}")
        fut.result(timeout)
        return self.poll(job_id)

    def run_sync(self, request: JobRequest) -> Job:
        return self.wait(self.submit(request))

    def jobs(self) -> list[Job]:
        with self._lock:
            return list(self._jobs.values())


def backend_executor(backend: BackendRecord, shots: int | None = None, seed: int = 0):
    """Gradient executor that runs every evaluation on a mock backend.

    Evaluations get independent child seeds in call order.
    """
    seeds = np.random.SeedSequence(seed)
    lock = threading.Lock()

    def run(circuit: CircuitDag, obs: Observable) -> float:
        with lock:
            child = int(seeds.spawn(1)[0].generate_state(1)[0])
        value, _ = execute(backend, JobRequest(circuit, backend.name, obs, shots, child))
        return float(value)

    run.shots = shots
    return run


__all__ = [
    "Calibration", "BackendRecord", "Registry", "ScoreWeights", "ScoreBreakdown", "JobStatus",
    "JobRequest", "Job", "ExecutionManager", "HalError", "load_registry", "score",
    "score_breakdown", "select_best", "execute", "backend_executor",
]

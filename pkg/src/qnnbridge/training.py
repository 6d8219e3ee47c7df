"""QuantumLayer, host adapters, datasets and the Adam/cross-entropy training loop."""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol

import numpy as np

from .circuit import CircuitDag, Observable, ParameterStore, PauliSum
from .encoders import EncodingConfig
from .export import AdamState, HistoryEntry, ModelBundle
from .gradients import GradientError, GradientResult, Strategy, adjoint_batch, gradient
from .model import class_observables, hardware_efficient_ansatz, logits, softmax
from .simulator import z_signs

_DATA = Path(__file__).with_name("data")


class TrainingError(ValueError):
    pass


# --- layer ------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantumLayer:
    encoding: EncodingConfig
    ansatz: CircuitDag
    observables: tuple[Observable, ...]
    strategy: Strategy = Strategy.ADJOINT
    executor: object | None = None

    def __post_init__(self):
        object.__setattr__(self, "observables", tuple(self.observables))
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.strategy is Strategy.ADJOINT and getattr(self.executor, "shots", None) is not None:
            raise GradientError("adjoint differentiation needs a statevector, not a shot-based executor")
        if len(self.observables) < 2:
            raise TrainingError("a classifier needs at least two logits")

    @classmethod
    def classifier(cls, n_qubits: int, layers: int, n_classes: int,
                   encoding: EncodingConfig | None = None, **kw) -> QuantumLayer:
        return cls(encoding or EncodingConfig("angle"), hardware_efficient_ansatz(n_qubits, layers),
                   class_observables(n_qubits, n_classes), **kw)

    @property
    def n_params(self) -> int:
        symbols = self.ansatz.symbols
        return symbols[-1] + 1 if symbols else 0

    @property
    def n_classes(self) -> int:
        return len(self.observables)

    def forward(self, xs, values, states=None) -> np.ndarray:
        """Logits for one sample (1-D ``xs``) or a batch."""
        single = states is None and np.ndim(xs) == 1
        out = logits(self.ansatz, values, self.encoding, self.observables,
                     None if states is not None else np.atleast_2d(xs), states)
        return out[0] if single else out

    def probabilities(self, xs, values) -> np.ndarray:
        return softmax(self.forward(xs, values))

    def loss_and_grad(self, xs, labels, values, states=None) -> tuple[float, np.ndarray]:
        """Mean cross-entropy and its gradient by the chain rule through the logits."""
        values = np.asarray(values, dtype=float)
        labels = np.asarray(labels, dtype=int)
        if states is None:
            states = self.encoding.states(np.atleast_2d(xs))
        batch = states.shape[0]
        if labels.shape != (batch,) or labels.min() < 0 or labels.max() >= self.n_classes:
            raise TrainingError(f"labels must be {batch} integers in [0, {self.n_classes})")
        z = logits(self.ansatz, values, self.encoding, self.observables, states=states)
        p = softmax(z)
        loss = float(-np.mean(np.log(p[np.arange(batch), labels])))
        dz = p.copy()
        dz[np.arange(batch), labels] -= 1
        dz /= batch
        return loss, self._backprop(states, xs, values, dz)

    def _backprop(self, states, xs, values, dz) -> np.ndarray:
        n = self.ansatz.n_qubits
        if self.strategy is Strategy.ADJOINT and _all_single_z(self.observables):
            signs = z_signs(n)[[_z_qubit(o) for o in self.observables]]
            diag = dz @ signs  # (B, 2**n): sum_k w_bk Z_k per sample
            _, grads = adjoint_batch(self.ansatz, values, states, lambda s: diag * s)
            return grads.sum(axis=0)
        g = np.zeros(values.size)
        xs = np.atleast_2d(xs)
        for b in range(xs.shape[0]):
            obs = _weighted(self.observables, dz[b])
            circuit = self.encoding.circuit(xs[b]) + self.ansatz
            g += gradient(circuit, values, obs, self.strategy, self.executor).g
        return g


def _z_qubit(obs) -> int | None:
    if isinstance(obs, PauliSum) and len(obs.terms) == 1 and obs.terms[0][0] == 1.0:
        label = obs.terms[0][1]
        if label.count("Z") == 1 and set(label) <= {"I", "Z"}:
            return label.index("Z")
    return None


def _all_single_z(observables) -> bool:
    return all(_z_qubit(o) is not None for o in observables)


def _weighted(observables, weights) -> PauliSum:
    terms = []
    for w, obs in zip(weights, observables):
        terms += [(w * c, s) for c, s in obs.terms]
    return PauliSum(tuple(terms))


# --- optimizer ------------------------------------------------------------------------

def adam_step(state: AdamState, values, grad) -> tuple[np.ndarray, AdamState]:
    values = np.asarray(values, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if grad.shape != values.shape:
        raise TrainingError(f"gradient shape {grad.shape} != parameter shape {values.shape}")
    m = np.zeros_like(values) if state.m is None else state.m
    v = np.zeros_like(values) if state.v is None else state.v
    step = state.step + 1
    m = state.beta1 * m + (1 - state.beta1) * grad
    v = state.beta2 * v + (1 - state.beta2) * grad ** 2
    m_hat = m / (1 - state.beta1 ** step)
    v_hat = v / (1 - state.beta2 ** step)
    new = values - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, replace(state, step=step, m=m, v=v)


# --- host adapters ----------------------------------------------------------------------

class HostAdapter(Protocol):
    """Bridge between a host framework's parameter/gradient types and the canonical store."""

    def to_canonical(self, host_params) -> ParameterStore: ...

    def from_canonical(self, store: ParameterStore): ...

    def inject_gradient(self, result: GradientResult) -> None: ...

    def forward_batch(self, xs): ...


class ReferenceAdapter:
    """Host type is a plain float vector; the conformance oracle for other adapters."""

    def __init__(self, layer: QuantumLayer, symbols: tuple[str, ...] = ()):
        self.layer = layer
        self.symbols = symbols
        self.params = np.zeros(layer.n_params)
        self.grad: np.ndarray | None = None

    def to_canonical(self, host_params) -> ParameterStore:
        return ParameterStore(np.array(host_params, dtype=float), self.symbols)

    def from_canonical(self, store: ParameterStore) -> np.ndarray:
        return np.array(store.values, dtype=float)

    def inject_gradient(self, result: GradientResult) -> None:
        self.grad = np.array(result.g, dtype=float)

    def forward_batch(self, xs) -> np.ndarray:
        return self.layer.forward(np.atleast_2d(xs), self.params)


# --- datasets -----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    n_classes: int


def read_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    body = np.array(rows[1:], dtype=float)
    return body[:, :-1], body[:, -1].astype(int)


def stratified_split(y, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        k = int(round(test_fraction * idx.size))
        test.extend(idx[:k])
        train.extend(idx[k:])
    return np.sort(train), np.sort(test)


@dataclass(frozen=True)
class MinMaxScaler:
    low: np.ndarray
    high: np.ndarray
    span: float = np.pi

    @classmethod
    def fit(cls, x, span: float = np.pi) -> MinMaxScaler:
        return cls(x.min(axis=0), x.max(axis=0), span)

    def transform(self, x) -> np.ndarray:
        width = np.where(self.high > self.low, self.high - self.low, 1.0)
        return (x - self.low) / width * self.span


@dataclass(frozen=True)
class PCA:
    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray

    @classmethod
    def fit(cls, x, k: int) -> PCA:
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        z = (x - mean) / scale
        _, _, vt = np.linalg.svd(z, full_matrices=False)
        # fix the sign of each axis so results do not depend on the LAPACK build
        signs = np.sign(vt[:k][np.arange(k), np.abs(vt[:k]).argmax(axis=1)])
        return cls(mean, scale, vt[:k] * signs[:, None])

    def transform(self, x) -> np.ndarray:
        return ((x - self.mean) / self.scale) @ self.components.T


def _finish(name, x, y, seed, test_fraction, reduce=None) -> Dataset:
    tr, te = stratified_split(y, test_fraction, seed)
    x_tr, x_te = x[tr], x[te]
    if reduce:
        pca = PCA.fit(x_tr, reduce)
        x_tr, x_te = pca.transform(x_tr), pca.transform(x_te)
    scaler = MinMaxScaler.fit(x_tr)
    return Dataset(name, scaler.transform(x_tr), y[tr], scaler.transform(x_te), y[te],
                   int(y.max()) + 1)


def load_iris(seed: int = 0, test_fraction: float = 0.2) -> Dataset:
    """Iris features min-max scaled to [0, pi] on the training split."""
    x, y = read_csv(_DATA / "iris.csv")
    return _finish("iris", x, y, seed, test_fraction)


def load_wine(seed: int = 0, test_fraction: float = 0.2, components: int = 4) -> Dataset:
    """Wine standardized and projected to ``components`` principal axes (train-fitted)."""
    x, y = read_csv(_DATA / "wine.csv")
    return _finish("wine", x, y, seed, test_fraction, reduce=components)


def read_idx(path) -> np.ndarray:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as fh:
        data = fh.read()
    zero, dtype, ndim = struct.unpack(">HBB", data[:4])
    if zero != 0 or dtype != 0x08:
        raise TrainingError(f"{path}: not an unsigned-byte IDX file")
    dims = struct.unpack(f">{ndim}I", data[4:4 + 4 * ndim])
    return np.frombuffer(data, dtype=np.uint8, offset=4 + 4 * ndim).reshape(dims)


def pool4(images: np.ndarray) -> np.ndarray:
    """Average-pool square images to 4x4 and flatten to 16 features."""
    n, h, w = images.shape
    if h % 4 or w % 4:
        raise TrainingError(f"image size {h}x{w} is not divisible by 4")
    return images.reshape(n, 4, h // 4, 4, w // 4).mean(axis=(2, 4)).reshape(n, 16)


def load_mnist4(images_path, labels_path, digits=(0, 1, 2, 3), per_class: int | None = 200,
                seed: int = 0, test_fraction: float = 0.2) -> Dataset:
    """MNIST digits pooled to 4x4 for amplitude encoding (features are not rescaled)."""
    images = read_idx(images_path).astype(float)
    labels = read_idx(labels_path).astype(int)
    rng = np.random.default_rng(seed)
    keep = []
    for d in digits:
        idx = np.flatnonzero(labels == d)
        if per_class is not None:
            idx = rng.permutation(idx)[:per_class]
        keep.extend(idx)
    keep = np.sort(np.array(keep, dtype=int))
    x = pool4(images[keep]) / 255.0
    y = np.searchsorted(np.array(digits), labels[keep])
    ok = np.linalg.norm(x, axis=1) > 0
    x, y = x[ok], y[ok]
    tr, te = stratified_split(y, test_fraction, seed)
    return Dataset("mnist4", x[tr], y[tr], x[te], y[te], len(digits))


# --- training loop ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int | None = 16
    seed: int = 0
    lr: float = 0.01
    strategy: Strategy = Strategy.ADJOINT
    init_scale: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise TrainingError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise TrainingError("batch_size must be >= 1")
        if self.lr <= 0:
            raise TrainingError("learning rate must be positive")
        object.__setattr__(self, "strategy", Strategy(self.strategy))


@dataclass(frozen=True, eq=False)
class TrainResult:
    bundle: ModelBundle
    train_accuracy: float
    test_accuracy: float
    history: tuple[HistoryEntry, ...] = field(default_factory=tuple)


def accuracy(layer: QuantumLayer, values, xs, ys) -> float:
    return float(np.mean(layer.forward(np.atleast_2d(xs), values).argmax(axis=1) == ys))


def initial_parameters(p: int, seed: int, scale: float) -> np.ndarray:
    return np.random.default_rng(seed).normal(0.0, scale, p)


def train(layer: QuantumLayer, data: Dataset, config: TrainConfig = TrainConfig(),
          adapter: HostAdapter | None = None) -> TrainResult:
    """Minibatch Adam on mean cross-entropy; bit-for-bit reproducible for a seed.

    With an ``adapter`` the parameters live in the host representation and
    cross the canonical boundary on every step.
    """
    if data.n_classes != layer.n_classes:
        raise TrainingError(f"dataset has {data.n_classes} classes, layer has {layer.n_classes} logits")
    if layer.strategy is not config.strategy:
        layer = replace(layer, strategy=config.strategy)
    rng = np.random.default_rng(config.seed)
    values = initial_parameters(layer.n_params, config.seed, config.init_scale)
    state = AdamState(lr=config.lr)
    states = layer.encoding.states(data.x_train)
    n = data.x_train.shape[0]
    bs = config.batch_size or n
    if adapter is not None:
        adapter.params = adapter.from_canonical(ParameterStore(values))
    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            if adapter is not None:
                values = adapter.to_canonical(adapter.params).values
            loss, g = layer.loss_and_grad(data.x_train[idx], data.y_train[idx], values, states[idx])
            if adapter is not None:
                adapter.inject_gradient(GradientResult(g, 0))
                g = adapter.grad
            values, state = adam_step(state, values, g)
            if adapter is not None:
                adapter.params = adapter.from_canonical(ParameterStore(values))
            losses.append(loss * idx.size)
        z = layer.forward(None, values, states=states)
        acc = float(np.mean(z.argmax(axis=1) == data.y_train))
        history.append(HistoryEntry(epoch, float(np.sum(losses) / n), acc))
    bundle = ModelBundle(layer.ansatz, ParameterStore(values), layer.encoding, layer.observables,
                         layer.n_classes, tuple(history), state)
    return TrainResult(bundle, history[-1].accuracy,
                       accuracy(layer, values, data.x_test, data.y_test), tuple(history))


def layer_for(bundle: ModelBundle, strategy: Strategy | str = Strategy.ADJOINT) -> QuantumLayer:
    return QuantumLayer(bundle.encoding, bundle.circuit, bundle.observables, Strategy(strategy))


__all__ = [
    "QuantumLayer", "HostAdapter", "ReferenceAdapter", "Dataset", "TrainConfig", "TrainResult",
    "TrainingError", "adam_step", "train", "accuracy", "load_iris", "load_wine", "load_mnist4",
    "read_idx", "pool4", "stratified_split", "layer_for", "MinMaxScaler", "PCA",
]

"""Small dense network trained with plain numpy.

Hidden layers use ReLU, the output layer softmax, and training minimizes mean
cross-entropy with momentum SGD. Weight matrices are stored ``(out, in)`` so a
layer computes ``x @ W.T + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np


@dataclass(frozen=True)
class ModelSpec:
    layer_dims: tuple[int, ...]
    tau: int = 2

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        if len(dims) < 3:
            raise ValueError("layer_dims needs at least input, one hidden and output width")
        if any(d < 1 for d in dims):
            raise ValueError(f"layer_dims must all be >= 1, got {dims}")
        if not 1 <= self.tau < len(dims) - 1:
            raise ValueError(f"tau must satisfy 1 <= tau < {len(dims) - 1}, got {self.tau}")

    @property
    def n_layers(self) -> int:
        """Number of weight layers."""
        return len(self.layer_dims) - 1

    @property
    def n_features(self) -> int:
        return self.layer_dims[0]

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    def layer_shapes(self) -> list[tuple[int, int]]:
        return [(self.layer_dims[k + 1], self.layer_dims[k]) for k in range(self.n_layers)]


@dataclass
class ParamSet:
    """Per-layer ``(weight, bias)`` pairs; weight has shape ``(out, in)``."""

    layers: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.layers)

    def __iter__(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        return iter(self.layers)

    def __getitem__(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        return self.layers[k]

    def shapes(self) -> list[tuple[int, int]]:
        return [w.shape for w, _ in self.layers]

    @property
    def size(self) -> int:
        return sum(w.size + b.size for w, b in self.layers)

    def copy(self) -> "ParamSet":
        return ParamSet([(w.copy(), b.copy()) for w, b in self.layers])

    def zeros_like(self) -> "ParamSet":
        return ParamSet([(np.zeros_like(w), np.zeros_like(b)) for w, b in self.layers])

    def equals(self, other: "ParamSet") -> bool:
        """Exact (bitwise value) equality of every array."""
        if len(self) != len(other):
            return False
        return all(
            w1.shape == w2.shape and np.array_equal(w1, w2) and np.array_equal(b1, b2)
            for (w1, b1), (w2, b2) in zip(self.layers, other.layers)
        )

    def validate(self) -> None:
        for k, (w, b) in enumerate(self.layers):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {k + 1}: weight {w.shape} and bias {b.shape} mismatch")
            if k and w.shape[1] != self.layers[k - 1][0].shape[0]:
                raise ValueError(
                    f"layer {k + 1} expects {w.shape[1]} inputs but layer {k} emits "
                    f"{self.layers[k - 1][0].shape[0]}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k + 1} holds non-finite values")


@dataclass
class Batch:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ValueError(
                f"features {self.features.shape} and labels {self.labels.shape} do not align"
            )

    def __len__(self) -> int:
        return self.labels.shape[0]

    def subset(self, idx) -> "Batch":
        return Batch(self.features[idx], self.labels[idx])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.5
    batch_size: int = 50
    local_epochs: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.local_epochs < 1:
            raise ValueError("local_epochs must be >= 1")


def init_params(spec: ModelSpec, seed: int) -> ParamSet:
    """Glorot-uniform weights in ``±sqrt(6 / (fan_in + fan_out))``, same bound for biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for d, n in spec.layer_shapes():
        bound = np.sqrt(6.0 / (n + d))
        w = rng.uniform(-bound, bound, size=(d, n))
        b = rng.uniform(-bound, bound, size=d)
        layers.append((w, b))
    return ParamSet(layers)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward_cache(params: ParamSet, x: np.ndarray) -> list[np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params[0][0].shape[1]:
        raise ValueError(
            f"features of shape {x.shape} do not match input width {params[0][0].shape[1]}"
        )
    acts = [x]
    last = len(params) - 1
    for k, (w, b) in enumerate(params):
        z = acts[-1] @ w.T + b
        acts.append(softmax(z) if k == last else np.maximum(z, 0.0))
    return acts


def forward(params: ParamSet, features: np.ndarray) -> np.ndarray:
    """Class probabilities, one row per sample."""
    return _forward_cache(params, features)[-1]


def loss_and_grads(params: ParamSet, batch: Batch) -> tuple[float, ParamSet]:
    n_classes = params[-1][0].shape[0]
    y = batch.labels
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    acts = _forward_cache(params, batch.features)
    probs = acts[-1]
    m = len(y)
    rows = np.arange(m)
    # log-softmax through the probabilities is fine at float64 for these scales
    loss = float(-np.mean(np.log(np.maximum(probs[rows, y], 1e-300))))

    delta = probs.copy()
    delta[rows, y] -= 1.0
    delta /= m
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params)  # type: ignore[list-item]
    for k in range(len(params) - 1, -1, -1):
        w, _ = params[k]
        grads[k] = (delta.T @ acts[k], delta.sum(axis=0))
        if k:
            delta = (delta @ w) * (acts[k] > 0)
    return loss, ParamSet(grads)


def local_train(params: ParamSet, shard: Batch, cfg: TrainConfig) -> ParamSet:
    """Momentum SGD over ``cfg.local_epochs`` shuffled passes of ``shard``.

    The final partial batch of each epoch is kept. Velocity follows
    ``v = momentum * v + g``; the step is ``w -= lr * v``.
    """
    n = len(shard)
    if n == 0:
        raise ValueError("cannot train on an empty shard")
    rng = np.random.default_rng(cfg.seed)
    bs = min(cfg.batch_size, n)
    out = params.copy()
    vel = out.zeros_like()
    for _ in range(cfg.local_epochs):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            _, grads = loss_and_grads(out, shard.subset(order[start:start + bs]))
            for (w, b), (vw, vb), (gw, gb) in zip(out, vel, grads):
                vw *= cfg.momentum
                vw += gw
                vb *= cfg.momentum
                vb += gb
                w -= cfg.learning_rate * vw
                b -= cfg.learning_rate * vb
    return out


def predict(params: ParamSet, features: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, so ties go to the lowest class index
    return np.argmax(forward(params, features), axis=1)


def evaluate(params: ParamSet, testset: Batch) -> float:
    if len(testset) == 0:
        raise ValueError("empty test set")
    return float(np.mean(predict(params, testset.features) == testset.labels))


def stack_batches(batches: Sequence[Batch]) -> Batch:
    return Batch(
        np.concatenate([b.features for b in batches]),
        np.concatenate([b.labels for b in batches]),
    )

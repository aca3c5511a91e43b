"""Datasets for the simulator: seeded Gaussian clusters, a text file format, and
client partitioning (stratified IID or Dirichlet label skew)."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nn import Batch


@dataclass
class Dataset:
    train: Batch
    test: Batch
    n_classes: int

    @property
    def n_features(self) -> int:
        return self.train.features.shape[1]


def make_synthetic(
    n_classes: int = 8,
    n_features: int = 16,
    n_train: int = 8000,
    n_test: int = 1000,
    clusters_per_class: int = 2,
    spread: float = 1.0,
    seed: int = 0,
) -> Dataset:
    """Gaussian mixture: each class owns ``clusters_per_class`` unit-variance blobs.

    Blob centres are drawn from ``N(0, spread^2)``; larger ``spread`` makes the
    task easier. Train and test come from the same mixture.
    """
    rng = np.random.default_rng(seed)
    centres = rng.normal(0.0, spread, size=(n_classes, clusters_per_class, n_features))

    def draw(n: int) -> Batch:
        labels = np.arange(n) % n_classes
        rng.shuffle(labels)
        blob = rng.integers(0, clusters_per_class, size=n)
        x = centres[labels, blob] + rng.normal(size=(n, n_features))
        return Batch(x, labels)

    return Dataset(draw(n_train), draw(n_test), n_classes)


def save_batch(batch: Batch, n_classes: int, path: str | Path) -> None:
    """Write ``n_samples,n_features,n_classes`` then one ``x1,...,xn,label`` row per sample."""
    n, d = batch.features.shape
    lines = [f"{n},{d},{n_classes}"]
    for x, y in zip(batch.features, batch.labels):
        lines.append(",".join(repr(float(v)) for v in x) + f",{int(y)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_batch(path: str | Path) -> tuple[Batch, int]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    try:
        n, d, c = (int(v) for v in lines[0].split(","))
    except ValueError as exc:
        raise ValueError(f"{path}: header must be 'n_samples,n_features,n_classes'") from exc
    if len(lines) - 1 != n:
        raise ValueError(f"{path}: header announces {n} samples, found {len(lines) - 1}")
    x = np.empty((n, d))
    y = np.empty(n, dtype=np.int64)
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != d + 1:
            raise ValueError(f"{path}: line {i + 2} has {len(parts)} fields, expected {d + 1}")
        x[i] = [float(v) for v in parts[:-1]]
        y[i] = int(parts[-1])
    if n and (y.min() < 0 or y.max() >= c):
        raise ValueError(f"{path}: labels must lie in [0, {c})")
    return Batch(x, y), c


def load_dataset(train_path: str | Path, test_path: str | Path) -> Dataset:
    train, c1 = load_batch(train_path)
    test, c2 = load_batch(test_path)
    if c1 != c2 or train.features.shape[1] != test.features.shape[1]:
        raise ValueError("train and test files disagree on feature or class counts")
    return Dataset(train, test, c1)


def partition_iid(labels: np.ndarray, n_clients: int, seed: int) -> list[np.ndarray]:
    """Stratified split: each class is dealt round-robin, continuing where the last class stopped."""
    rng = np.random.default_rng(seed)
    shards: list[list[int]] = [[] for _ in range(n_clients)]
    offset = 0
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        for j, i in enumerate(idx):
            shards[(offset + j) % n_clients].append(int(i))
        offset = (offset + len(idx)) % n_clients
    return [np.array(sorted(s), dtype=np.int64) for s in shards]


def partition_dirichlet(
    labels: np.ndarray,
    n_clients: int,
    alpha: float | None,
    seed: int,
    max_retries: int = 100,
) -> list[np.ndarray]:
    """Split sample indices across clients with Dirichlet(alpha) class proportions.

    ``alpha=None`` gives the stratified IID split. Draws are repeated until no
    shard is empty; ``RuntimeError`` after ``max_retries`` attempts.
    """
    labels = np.asarray(labels)
    if len(labels) < n_clients:
        raise ValueError(f"{len(labels)} samples cannot fill {n_clients} non-empty shards")
    if alpha is None:
        return partition_iid(labels, n_clients, seed)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    rng = np.random.default_rng(seed)
    classes = np.unique(labels)
    for _ in range(max_retries):
        shards: list[list[int]] = [[] for _ in range(n_clients)]
        for cls in classes:
            idx = rng.permutation(np.flatnonzero(labels == cls))
            props = rng.dirichlet(np.full(n_clients, alpha))
            cuts = (np.cumsum(props) * len(idx)).astype(int)[:-1]
            for c, part in enumerate(np.split(idx, cuts)):
                shards[c].extend(int(i) for i in part)
        if all(shards):
            return [np.array(sorted(s), dtype=np.int64) for s in shards]
    raise RuntimeError(
        f"no partition with all {n_clients} shards non-empty after {max_retries} draws (alpha={alpha})"
    )


def label_histogram(labels: np.ndarray, n_classes: int) -> np.ndarray:
    return np.bincount(labels, minlength=n_classes)

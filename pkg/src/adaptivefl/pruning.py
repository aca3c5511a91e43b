"""Width-wise pruning: sub-model extraction, the model pool, budget fitting and counting.

Weight layers are numbered ``1..N``. A config ``(r_w, I)`` keeps layers
``k <= I`` intact. Every layer ``k > I`` keeps its leading ``ceil(d_k * r_w)``
output units. A layer's input is pruned only when the layer feeding it was
pruned, so sub-models remain runnable networks. The network input width and
the class count are never pruned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .nn import ModelSpec, ParamSet

LEVELS = ("S", "M", "L")


@dataclass(frozen=True)
class PruneConfig:
    level: str
    variant: int
    r_w: float
    start_layer: int  # I: last layer kept at full width

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"level must be one of {LEVELS}, got {self.level!r}")
        if not 0.0 < self.r_w <= 1.0:
            raise ValueError(f"r_w must lie in (0, 1], got {self.r_w}")
        if self.level == "L" and (self.r_w != 1.0 or self.variant != 1):
            raise ValueError("level L is the unpruned model: r_w = 1 and variant = 1")
        if self.variant < 1:
            raise ValueError("variant numbering starts at 1")

    @property
    def label(self) -> str:
        return f"{self.level}_{self.variant}"

    def contains(self, other: "PruneConfig") -> bool:
        """True if every coordinate kept by ``other`` is also kept by ``self``."""
        if self.r_w == 1.0:
            return True
        return other.r_w <= self.r_w and other.start_layer <= self.start_layer


def identity_config(spec: ModelSpec) -> PruneConfig:
    return PruneConfig("L", 1, 1.0, spec.n_layers)


def _kept_units(width: int, r_w: float) -> int:
    # rounding guards against r_w * width landing a hair above an integer
    return max(1, math.ceil(round(width * r_w, 9)))


def kept_shapes(spec: ModelSpec, cfg: PruneConfig) -> list[tuple[int, int]]:
    """``(rows, cols)`` kept per weight layer under ``cfg``."""
    if cfg.start_layer < spec.tau:
        raise ValueError(f"start layer {cfg.start_layer} is below tau={spec.tau}")
    shapes = []
    prev_rows = spec.n_features
    last = spec.n_layers
    for k, (d, _) in enumerate(spec.layer_shapes(), start=1):
        rows = d if (k <= cfg.start_layer or k == last) else _kept_units(d, cfg.r_w)
        shapes.append((rows, prev_rows))
        prev_rows = rows
    return shapes


def model_size(spec: ModelSpec, cfg: PruneConfig) -> int:
    """Parameter count (weights and biases) of the dense sub-model."""
    return sum(r * c + r for r, c in kept_shapes(spec, cfg))


def prune_params(global_params: ParamSet, cfg: PruneConfig, spec: ModelSpec) -> ParamSet:
    if global_params.shapes() != spec.layer_shapes():
        raise ValueError("global parameters do not match the model spec")
    return ParamSet(
        [
            (w[:r, :c].copy(), b[:r].copy())
            for (w, b), (r, c) in zip(global_params, kept_shapes(spec, cfg))
        ]
    )


@dataclass(frozen=True)
class ModelPool:
    """Pool entries ordered by ascending size: ``S_p .. S_1, M_p .. M_1, L_1``."""

    entries: tuple[PruneConfig, ...]
    sizes: tuple[int, ...]
    level_ratios: Mapping[str, float]
    p: int

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> PruneConfig:
        return self.entries[i]

    def index(self, cfg: PruneConfig) -> int:
        return self.entries.index(cfg)

    @property
    def top(self) -> int:
        return len(self.entries) - 1

    def level_rows(self, level: str) -> list[int]:
        return [i for i, e in enumerate(self.entries) if e.level == level]

    def find(self, label: str) -> int:
        for i, e in enumerate(self.entries):
            if e.label == label:
                return i
        raise KeyError(label)

    def labels(self) -> list[str]:
        return [e.label for e in self.entries]


def build_pool(
    spec: ModelSpec, level_ratios: Mapping[str, float], start_layers: Sequence[int]
) -> ModelPool:
    """Split the global model into ``2p + 1`` configs.

    ``start_layers`` lists I for variants 1..p, strictly decreasing, so
    variant 1 is the largest within its level.
    """
    p = len(start_layers)
    if p < 1:
        raise ValueError("start_layers must hold at least one index")
    ratios = {k: float(v) for k, v in level_ratios.items()}
    ratios.setdefault("L", 1.0)
    if set(ratios) != set(LEVELS):
        raise ValueError(f"level_ratios must cover exactly S, M (and optionally L), got {sorted(ratios)}")
    for lvl, r in ratios.items():
        if not 0.0 < r <= 1.0:
            raise ValueError(f"level_ratios[{lvl}] = {r} is outside (0, 1]")
    if ratios["L"] != 1.0:
        raise ValueError("level_ratios[L] must be 1.0")
    if any(i < spec.tau or i > spec.n_layers for i in start_layers):
        raise ValueError(f"start_layers {list(start_layers)} must lie in [{spec.tau}, {spec.n_layers}]")
    if any(a <= b for a, b in zip(start_layers, start_layers[1:])):
        raise ValueError(f"start_layers must be strictly decreasing, got {list(start_layers)}")

    entries = []
    for lvl in ("S", "M"):
        for v in range(p, 0, -1):
            entries.append(PruneConfig(lvl, v, ratios[lvl], int(start_layers[v - 1])))
    entries.append(identity_config(spec))
    sizes = tuple(model_size(spec, e) for e in entries)
    if any(a >= b for a, b in zip(sizes, sizes[1:])):
        listing = ", ".join(f"{e.label}={s}" for e, s in zip(entries, sizes))
        raise ValueError(f"pool sizes are not strictly increasing: {listing}")
    return ModelPool(tuple(entries), sizes, ratios, p)


def fit_to_budget(
    received: PruneConfig, capacity: int, pool: ModelPool, spec: ModelSpec | None = None
) -> PruneConfig:
    """Largest pool entry nested inside ``received`` whose size fits ``capacity``."""
    best = None
    for cfg, size in zip(pool.entries, pool.sizes):
        if size <= capacity and received.contains(cfg):
            if best is None or size > best[1]:
                best = (cfg, size)
    if best is None:
        raise ValueError(
            f"capacity {capacity} is below every pool entry nested in {received.label} "
            f"(smallest pool entry has {pool.sizes[0]} parameters)"
        )
    return best[0]


# -- parameter counting for arbitrary (conv or dense) stacks ------------------


@dataclass(frozen=True)
class ShapeLayer:
    kind: str  # "dense" or "conv3x3"
    in_channels: int
    out_channels: int
    prune_in: bool = True
    prune_out: bool = True

    @property
    def kernel(self) -> int:
        return 9 if self.kind == "conv3x3" else 1


@dataclass(frozen=True)
class ShapeSpec:
    layers: tuple[ShapeLayer, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("shape spec is empty")
        if self.layers[0].prune_in or self.layers[-1].prune_out:
            raise ValueError("first layer input and last layer output must be non-prunable")
        for layer in self.layers:
            if layer.kind not in ("dense", "conv3x3"):
                raise ValueError(f"unknown layer kind {layer.kind!r}")


def parse_shape_spec(text: str) -> ShapeSpec:
    """Parse ``kind in out prune_in prune_out`` lines; ``#`` starts a comment."""
    layers = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        kind, cin, cout, pin, pout = parts
        layers.append(ShapeLayer(kind, int(cin), int(cout), pin == "1", pout == "1"))
    return ShapeSpec(tuple(layers))


def load_shape_spec(path: str | Path) -> ShapeSpec:
    return parse_shape_spec(Path(path).read_text())


def vgg16_shape() -> ShapeSpec:
    text = resources.files("adaptivefl").joinpath("data/vgg16.shape").read_text()
    return parse_shape_spec(text)


def param_count(shape: ShapeSpec, r_w: float = 1.0, start_layer: int | None = None) -> int:
    """Weight count (no biases) of ``shape`` pruned with ratio ``r_w`` from layer ``start_layer``."""
    if not 0.0 < r_w <= 1.0:
        raise ValueError(f"r_w must lie in (0, 1], got {r_w}")
    if start_layer is None:
        start_layer = len(shape.layers)
    total = 0
    prev_pruned = False
    for k, layer in enumerate(shape.layers, start=1):
        pruned = k > start_layer and layer.prune_out
        rows = _kept_units(layer.out_channels, r_w) if pruned else layer.out_channels
        cols = (
            _kept_units(layer.in_channels, r_w)
            if prev_pruned and layer.prune_in
            else layer.in_channels
        )
        total += rows * cols * layer.kernel
        prev_pruned = pruned
    return total


def config_param_count(shape: ShapeSpec, cfg: PruneConfig) -> int:
    return param_count(shape, cfg.r_w, cfg.start_layer)


def kept_mask(spec: ModelSpec, cfg: PruneConfig) -> list[np.ndarray]:
    """Boolean weight masks (full global shapes) marking coordinates kept by ``cfg``."""
    masks = []
    for (d, n), (r, c) in zip(spec.layer_shapes(), kept_shapes(spec, cfg)):
        m = np.zeros((d, n), dtype=bool)
        m[:r, :c] = True
        masks.append(m)
    return masks

"""Experiment configuration files (YAML).

Schema (every section optional except ``seed``; omitted fields take defaults)::

    seed: 1                      # required
    out_dir: runs/example
    scenario: {n_clients, clients_per_round, proportions: [weak, medium, strong],
               alpha (null = IID), rounds, strategy}
    model:    {layer_dims: [...], tau}
    pool:     {level_ratios: {S, M, L}, start_layers: [I_1, ..., I_p]}
    train:    {learning_rate, momentum, batch_size, local_epochs}
    data:     {synthetic: {n_train, n_test, clusters_per_class, spread}}
              or {train_file: PATH, test_file: PATH}   # relative to the config file
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .data import Dataset, load_dataset, make_synthetic
from .federation import DEFAULT_SPEC, STRATEGIES, PoolConfig, Scenario
from .nn import ModelSpec, TrainConfig
from .pruning import build_pool


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


SECTION_KEYS = {
    "scenario": {"n_clients", "clients_per_round", "proportions", "alpha", "rounds", "strategy"},
    "model": {"layer_dims", "tau"},
    "pool": {"level_ratios", "start_layers"},
    "train": {"learning_rate", "momentum", "batch_size", "local_epochs"},
    "data": {"synthetic", "train_file", "test_file"},
}
SYNTHETIC_KEYS = {"n_train", "n_test", "clusters_per_class", "spread"}
TOP_KEYS = {"seed", "out_dir"} | set(SECTION_KEYS)


@dataclass
class DataConfig:
    synthetic: dict[str, Any] = field(default_factory=dict)
    train_file: str | None = None
    test_file: str | None = None

    def load(self, spec: ModelSpec, seed: int, base: Path | None = None) -> Dataset:
        if self.train_file:
            base = base or Path.cwd()
            return load_dataset(base / self.train_file, base / self.test_file)
        return make_synthetic(
            n_classes=spec.n_classes, n_features=spec.n_features, seed=seed, **self.synthetic
        )

    def to_dict(self) -> dict:
        if self.train_file:
            return {"train_file": self.train_file, "test_file": self.test_file}
        return {"synthetic": dict(self.synthetic)}


@dataclass
class ExperimentConfig:
    seed: int
    scenario: Scenario = field(default_factory=Scenario)
    model: ModelSpec = DEFAULT_SPEC
    pool: PoolConfig = field(default_factory=PoolConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    out_dir: str | None = None
    base_dir: Path | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        s = self.scenario
        out = {
            "seed": self.seed,
            "scenario": {
                "n_clients": s.n_clients,
                "clients_per_round": s.clients_per_round,
                "proportions": list(s.proportions),
                "alpha": s.alpha,
                "rounds": s.rounds,
                "strategy": s.strategy,
            },
            "model": {"layer_dims": list(self.model.layer_dims), "tau": self.model.tau},
            "pool": {
                "level_ratios": dict(self.pool.level_ratios),
                "start_layers": list(self.pool.start_layers),
            },
            "train": {
                "learning_rate": self.train.learning_rate,
                "momentum": self.train.momentum,
                "batch_size": self.train.batch_size,
                "local_epochs": self.train.local_epochs,
            },
            "data": self.data.to_dict(),
        }
        if self.out_dir is not None:
            out["out_dir"] = self.out_dir
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def load_dataset(self) -> Dataset:
        return self.data.load(self.model, self.seed, self.base_dir)


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name, {}) or {}
    if not isinstance(sec, dict):
        raise ConfigError(name, "must be a mapping")
    unknown = set(sec) - SECTION_KEYS[name]
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"{name}.{key}", "unknown key")
    return sec


def _int(value: Any, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    return value


def _num(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    return float(value)


def config_from_dict(raw: Any, base_dir: Path | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    if "seed" not in raw or raw["seed"] is None:
        raise ConfigError("seed", "missing required key (runs must be seeded)")
    seed = _int(raw["seed"], "seed")
    out_dir = raw.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("out_dir", "expected a path string")

    sc = _section(raw, "scenario")
    defaults = Scenario()
    proportions = sc.get("proportions", list(defaults.proportions))
    if not isinstance(proportions, (list, tuple)) or len(proportions) != 3:
        raise ConfigError("scenario.proportions", "expected [weak, medium, strong]")
    proportions = tuple(_int(v, "scenario.proportions") for v in proportions)
    if min(proportions) < 0 or sum(proportions) == 0:
        raise ConfigError("scenario.proportions", "weights must be non-negative and not all zero")
    alpha = sc.get("alpha", defaults.alpha)
    if alpha is not None:
        alpha = _num(alpha, "scenario.alpha")
        if alpha <= 0:
            raise ConfigError("scenario.alpha", "must be positive (null selects IID)")
    strategy = sc.get("strategy", defaults.strategy)
    if strategy not in STRATEGIES:
        raise ConfigError("scenario.strategy", f"{strategy!r} is not one of {', '.join(STRATEGIES)}")
    n_clients = _int(sc.get("n_clients", defaults.n_clients), "scenario.n_clients")
    if n_clients < 1:
        raise ConfigError("scenario.n_clients", "must be >= 1")
    k = _int(sc.get("clients_per_round", defaults.clients_per_round), "scenario.clients_per_round")
    if not 1 <= k <= n_clients:
        raise ConfigError("scenario.clients_per_round", f"must lie in [1, n_clients={n_clients}]")
    rounds = _int(sc.get("rounds", defaults.rounds), "scenario.rounds")
    if rounds < 0:
        raise ConfigError("scenario.rounds", "must be >= 0")
    scenario = Scenario(n_clients, k, proportions, alpha, rounds, strategy)

    md = _section(raw, "model")
    dims = md.get("layer_dims", list(DEFAULT_SPEC.layer_dims))
    if not isinstance(dims, (list, tuple)):
        raise ConfigError("model.layer_dims", "expected a list of widths")
    dims = tuple(_int(v, "model.layer_dims") for v in dims)
    tau = _int(md.get("tau", DEFAULT_SPEC.tau), "model.tau")
    try:
        spec = ModelSpec(dims, tau)
    except ValueError as exc:
        key = "model.tau" if "tau" in str(exc) else "model.layer_dims"
        raise ConfigError(key, str(exc)) from None

    pl = _section(raw, "pool")
    ratios = pl.get("level_ratios", dict(PoolConfig().level_ratios))
    if not isinstance(ratios, dict) or not {"S", "M"} <= set(ratios) <= {"S", "M", "L"}:
        raise ConfigError("pool.level_ratios", "expected a mapping with keys S, M (and optionally L)")
    ratios = {lvl: _num(v, "pool.level_ratios") for lvl, v in ratios.items()}
    for lvl, r in ratios.items():
        if not 0.0 < r <= 1.0:
            raise ConfigError("pool.level_ratios", f"{lvl} = {r} is outside (0, 1]")
    ratios.setdefault("L", 1.0)
    if ratios["L"] != 1.0:
        raise ConfigError("pool.level_ratios", "L must be 1.0 (the unpruned model)")
    starts = pl.get("start_layers", list(PoolConfig().start_layers))
    if not isinstance(starts, (list, tuple)) or not starts:
        raise ConfigError("pool.start_layers", "expected a non-empty list")
    starts = tuple(_int(v, "pool.start_layers") for v in starts)
    pool_cfg = PoolConfig({k: ratios[k] for k in ("S", "M", "L")}, starts)
    try:
        build_pool(spec, pool_cfg.level_ratios, pool_cfg.start_layers)
    except ValueError as exc:
        raise ConfigError("pool.start_layers", str(exc)) from None

    tr = _section(raw, "train")
    td = TrainConfig()
    lr = _num(tr.get("learning_rate", td.learning_rate), "train.learning_rate")
    if lr <= 0:
        raise ConfigError("train.learning_rate", "must be > 0")
    mom = _num(tr.get("momentum", td.momentum), "train.momentum")
    if not 0 <= mom < 1:
        raise ConfigError("train.momentum", "must lie in [0, 1)")
    bs = _int(tr.get("batch_size", td.batch_size), "train.batch_size")
    if bs < 1:
        raise ConfigError("train.batch_size", "must be >= 1")
    ep = _int(tr.get("local_epochs", td.local_epochs), "train.local_epochs")
    if ep < 1:
        raise ConfigError("train.local_epochs", "must be >= 1")
    train = TrainConfig(lr, mom, bs, ep, seed)

    dt = _section(raw, "data")
    if "synthetic" in dt and ("train_file" in dt or "test_file" in dt):
        raise ConfigError("data", "give either synthetic or train_file/test_file, not both")
    if "train_file" in dt or "test_file" in dt:
        for key in ("train_file", "test_file"):
            if not isinstance(dt.get(key), str):
                raise ConfigError(f"data.{key}", "expected a path string")
        data = DataConfig(train_file=dt["train_file"], test_file=dt["test_file"])
    else:
        syn = dt.get("synthetic", {}) or {}
        if not isinstance(syn, dict):
            raise ConfigError("data.synthetic", "must be a mapping")
        unknown = set(syn) - SYNTHETIC_KEYS
        if unknown:
            raise ConfigError(f"data.synthetic.{sorted(unknown)[0]}", "unknown key")
        for key in ("n_train", "n_test", "clusters_per_class"):
            if key in syn and _int(syn[key], f"data.synthetic.{key}") < 1:
                raise ConfigError(f"data.synthetic.{key}", "must be >= 1")
        if "spread" in syn and _num(syn["spread"], "data.synthetic.spread") <= 0:
            raise ConfigError("data.synthetic.spread", "must be positive")
        if syn.get("n_train", 8000) < n_clients:
            raise ConfigError("data.synthetic.n_train", "needs at least one sample per client")
        data = DataConfig(synthetic=dict(syn))

    return ExperimentConfig(seed, scenario, spec, pool_cfg, train, data, out_dir, base_dir)


def parse_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"malformed YAML in {path}: {exc}") from None
    return config_from_dict(raw, path.parent.resolve())


def example_config_path() -> Path:
    return Path(str(resources.files("adaptivefl").joinpath("data/example.yaml")))

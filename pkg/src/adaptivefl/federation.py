"""Round orchestration: pool draw, client selection, budget fitting, local
training, table updates, aggregation and per-round metrics."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .aggregation import ReturnedModel, aggregate, fedavg
from .data import Dataset, make_synthetic, partition_dirichlet
from .nn import Batch, ModelSpec, ParamSet, TrainConfig, evaluate, init_params, local_train
from .pruning import ModelPool, PruneConfig, build_pool, fit_to_budget, prune_params
from .selection import Tables, select_clients, update_tables

log = logging.getLogger(__name__)

STRENGTHS = ("weak", "medium", "strong")

# strategy name -> reward mode used by select_clients
SELECTION_MODES = {
    "adaptivefl": "combined",
    "curiosity-only": "curiosity",
    "resource-only": "resource",
    "random": "uniform",
    "greedy": "uniform",
    "all-large": "uniform",
}
STRATEGIES = tuple(SELECTION_MODES) + ("decoupled",)


@dataclass(frozen=True)
class PoolConfig:
    level_ratios: Mapping[str, float] = field(default_factory=lambda: {"S": 0.40, "M": 0.66, "L": 1.0})
    start_layers: tuple[int, ...] = (4, 3, 2)

    @property
    def p(self) -> int:
        return len(self.start_layers)

    def build(self, spec: ModelSpec) -> ModelPool:
        return build_pool(spec, self.level_ratios, self.start_layers)


@dataclass(frozen=True)
class Scenario:
    n_clients: int = 20
    clients_per_round: int = 2
    proportions: tuple[int, int, int] = (4, 3, 3)  # weak : medium : strong
    alpha: float | None = 0.5  # None -> IID split
    rounds: int = 100
    strategy: str = "adaptivefl"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {', '.join(STRATEGIES)}")
        if not 1 <= self.clients_per_round <= self.n_clients:
            raise ValueError("clients_per_round must lie in [1, n_clients]")
        if len(self.proportions) != 3 or min(self.proportions) < 0 or sum(self.proportions) == 0:
            raise ValueError("proportions needs three non-negative weights (weak, medium, strong)")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError("alpha must be positive (or None for IID)")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")


@dataclass
class ClientState:
    id: int
    strength: str
    capacity: int
    shard: Batch

    @property
    def data_size(self) -> int:
        return len(self.shard)


@dataclass
class Dispatch:
    client: int
    sent: str
    returned: str
    sent_size: int
    returned_size: int


@dataclass
class RoundRecord:
    round: int
    dispatches: list[Dispatch]
    acc_full: float
    acc_L1: float
    acc_M1: float
    acc_S1: float
    waste_rate: float
    tables: dict | None = None

    @property
    def acc_avg(self) -> float:
        return (self.acc_L1 + self.acc_M1 + self.acc_S1) / 3.0

    def to_dict(self) -> dict:
        return asdict(self)


def comm_waste_rate(dispatches: Sequence[Dispatch]) -> float:
    sent = sum(d.sent_size for d in dispatches)
    if sent == 0:
        raise ValueError("waste rate needs at least one dispatch")
    return 1.0 - sum(d.returned_size for d in dispatches) / sent


def strength_counts(proportions: Sequence[int], n_clients: int) -> list[int]:
    """Largest-remainder apportionment of ``n_clients`` to the three strengths."""
    total = sum(proportions)
    quotas = [n_clients * w / total for w in proportions]
    counts = [int(q) for q in quotas]
    by_remainder = sorted(range(3), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in by_remainder[: n_clients - sum(counts)]:
        counts[i] += 1
    return counts


def capacity_bands(pool: ModelPool) -> dict[str, tuple[int, int]]:
    """Inclusive parameter-budget ranges per strength class."""
    s1 = pool.sizes[pool.find("S_1")]
    m_small = pool.sizes[pool.level_rows("M")[0]]
    m1 = pool.sizes[pool.find("M_1")]
    full = pool.sizes[pool.top]
    return {"weak": (s1, m_small - 1), "medium": (m1, full - 1), "strong": (full, 2 * full)}


def make_clients(
    dataset: Dataset, scenario: Scenario, pool: ModelPool, seed: int
) -> list[ClientState]:
    part_seed, cap_seed = np.random.SeedSequence(seed).generate_state(2)
    shards = partition_dirichlet(dataset.train.labels, scenario.n_clients, scenario.alpha, int(part_seed))
    rng = np.random.default_rng(cap_seed)
    counts = strength_counts(scenario.proportions, scenario.n_clients)
    strengths = [s for s, n in zip(STRENGTHS, counts) for _ in range(n)]
    strengths = [strengths[i] for i in rng.permutation(len(strengths))]
    bands = capacity_bands(pool)
    clients = []
    for cid, (strength, idx) in enumerate(zip(strengths, shards)):
        lo, hi = bands[strength]
        clients.append(ClientState(cid, strength, int(rng.integers(lo, hi + 1)), dataset.train.subset(idx)))
    return clients


@dataclass
class FederationState:
    spec: ModelSpec
    scenario: Scenario
    train_cfg: TrainConfig
    clients: list[ClientState]
    testset: Batch
    global_params: ParamSet
    level_models: dict[str, ParamSet] | None = None  # decoupled baseline only
    history: list[Dispatch] = field(default_factory=list)
    round_index: int = 0


def _train(client: ClientState, params: ParamSet, cfg: TrainConfig, seed: int) -> ParamSet:
    return local_train(
        params,
        client.shard,
        TrainConfig(cfg.learning_rate, cfg.momentum, cfg.batch_size, cfg.local_epochs, seed),
    )


def _level_accuracies(state: FederationState, pool: ModelPool) -> tuple[float, float, float]:
    test = state.testset
    if state.level_models is not None:
        return tuple(evaluate(state.level_models[lvl], test) for lvl in ("L_1", "M_1", "S_1"))
    g = state.global_params
    acc_l = evaluate(g, test)
    acc_m = evaluate(prune_params(g, pool[pool.find("M_1")], state.spec), test)
    acc_s = evaluate(prune_params(g, pool[pool.find("S_1")], state.spec), test)
    return acc_l, acc_m, acc_s


def _decoupled_round(state: FederationState, pool: ModelPool, rng: np.random.Generator) -> list[Dispatch]:
    k = state.scenario.clients_per_round
    ids = sorted(int(c) for c in rng.choice(len(state.clients), size=k, replace=False))
    seeds = rng.integers(0, 2**63, size=k)
    levels = [pool.find(lbl) for lbl in ("S_1", "M_1", "L_1")]
    returns: dict[str, list[tuple[ParamSet, int]]] = {}
    dispatches = []
    for cid, seed in zip(ids, seeds):
        client = state.clients[cid]
        idx = max(i for i in levels if pool.sizes[i] <= client.capacity)
        label = pool[idx].label
        trained = _train(client, state.level_models[label], state.train_cfg, int(seed))
        returns.setdefault(label, []).append((trained, client.data_size))
        dispatches.append(Dispatch(cid, label, label, pool.sizes[idx], pool.sizes[idx]))
    for label, items in returns.items():
        state.level_models[label] = fedavg([m for m, _ in items], [n for _, n in items])
    state.global_params = state.level_models["L_1"]
    return dispatches


def run_round(
    state: FederationState, pool: ModelPool, tables: Tables, rng: np.random.Generator
) -> tuple[ParamSet, Tables, RoundRecord]:
    """Advance ``state`` by one round; ``state`` and ``tables`` are updated in place."""
    scenario = state.scenario
    strategy = scenario.strategy
    k = scenario.clients_per_round
    if strategy == "decoupled":
        dispatches = _decoupled_round(state, pool, rng)
    else:
        if strategy in ("greedy", "all-large"):
            sent = [pool.top] * k
        else:
            sent = [int(i) for i in rng.integers(0, len(pool), size=k)]
        chosen = select_clients(
            sent, range(len(state.clients)), tables, pool, rng, SELECTION_MODES[strategy]
        )
        seeds = rng.integers(0, 2**63, size=k)

        outcomes = []
        for m, cid, seed in zip(sent, chosen, seeds):
            client = state.clients[cid]
            if strategy == "all-large":
                back = m
            else:
                back = pool.index(fit_to_budget(pool[m], client.capacity, pool, state.spec))
            cfg = pool[back]
            trained = _train(client, prune_params(state.global_params, cfg, state.spec), state.train_cfg, int(seed))
            outcomes.append((cid, m, back, trained))

        outcomes.sort(key=lambda o: o[0])
        dispatches = []
        returned = []
        for cid, m, back, trained in outcomes:
            update_tables(m, back, cid, tables, pool)
            returned.append(ReturnedModel(trained, pool[back], state.clients[cid].data_size, cid))
            dispatches.append(Dispatch(cid, pool[m].label, pool[back].label, pool.sizes[m], pool.sizes[back]))
        state.global_params = aggregate(state.global_params, returned, state.spec)

    state.history.extend(dispatches)
    state.round_index += 1
    acc_l, acc_m, acc_s = _level_accuracies(state, pool)
    record = RoundRecord(
        round=state.round_index,
        dispatches=dispatches,
        acc_full=acc_l,
        acc_L1=acc_l,
        acc_M1=acc_m,
        acc_S1=acc_s,
        waste_rate=comm_waste_rate(state.history),
        tables=None if strategy == "decoupled" else tables.to_dict(),
    )
    log.debug("round %d acc_full=%.4f waste=%.4f", record.round, acc_l, record.waste_rate)
    return state.global_params, tables, record


class Simulation:
    """Holds everything one experiment needs; ``run()`` executes all rounds."""

    def __init__(
        self,
        scenario: Scenario,
        spec: ModelSpec,
        pool_cfg: PoolConfig,
        train_cfg: TrainConfig,
        seed: int,
        dataset: Dataset | None = None,
    ):
        if dataset is None:
            dataset = make_synthetic(n_classes=spec.n_classes, n_features=spec.n_features, seed=seed)
        if dataset.n_features != spec.n_features or dataset.n_classes != spec.n_classes:
            raise ValueError(
                f"dataset has {dataset.n_features} features / {dataset.n_classes} classes, "
                f"model expects {spec.n_features} / {spec.n_classes}"
            )
        self.scenario = scenario
        self.pool = pool_cfg.build(spec)
        client_seed, init_seed, round_seed = np.random.SeedSequence(seed).generate_state(3)
        clients = make_clients(dataset, scenario, self.pool, int(client_seed))
        g = init_params(spec, int(init_seed))
        level_models = None
        if scenario.strategy == "decoupled":
            level_models = {
                lbl: prune_params(g, self.pool[self.pool.find(lbl)], spec) for lbl in ("S_1", "M_1", "L_1")
            }
        self.state = FederationState(spec, scenario, train_cfg, clients, dataset.test, g, level_models)
        self.initial_params = g.copy()
        self.tables = Tables.create(scenario.n_clients, self.pool.p)
        self.rng = np.random.default_rng(round_seed)
        self.records: list[RoundRecord] = []

    def step(self) -> RoundRecord:
        _, self.tables, record = run_round(self.state, self.pool, self.tables, self.rng)
        self.records.append(record)
        return record

    def run(self) -> list[RoundRecord]:
        for _ in range(self.scenario.rounds):
            self.step()
        return self.records

    @property
    def global_params(self) -> ParamSet:
        return self.state.global_params


def run_experiment(
    scenario: Scenario,
    spec: ModelSpec,
    pool_cfg: PoolConfig,
    train_cfg: TrainConfig,
    seed: int,
    dataset: Dataset | None = None,
) -> list[RoundRecord]:
    return Simulation(scenario, spec, pool_cfg, train_cfg, seed, dataset).run()


DEFAULT_SPEC = ModelSpec((16, 16, 24, 32, 48, 64, 64, 64, 8), tau=2)

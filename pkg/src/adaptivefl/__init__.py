"""Deterministic simulator for adaptive heterogeneous federated learning with
width-pruned sub-models and table-driven client selection."""

from .aggregation import ReturnedModel, aggregate, fedavg
from .federation import (
    PoolConfig,
    RoundRecord,
    Scenario,
    Simulation,
    comm_waste_rate,
    run_experiment,
    run_round,
)
from .nn import Batch, ModelSpec, ParamSet, TrainConfig, evaluate, forward, init_params, local_train
from .pruning import PruneConfig, build_pool, fit_to_budget, param_count, prune_params

__version__ = "0.1.0"
